use nalgebra::Vector3;
use xsreg::formats::*;
use xsreg::transform_file::*;
use xsreg_core::geometry::rotation_zyx;
use xsreg_core::meshgen::icosphere;
use xsreg_core::{Point3, PointCloud, SimilarityTransform};

fn roundtrip_ply(cloud: &PointCloud, format: PlyFormat) -> PointCloud {
    let mut buf = Vec::new();
    write_ply_to(&mut buf, cloud, None, format).unwrap();
    read_ply_from(buf.as_slice(), "rt").unwrap()
}

#[test]
fn ply_roundtrip_is_exact() {
    let mesh = icosphere(2);
    for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
        let back = roundtrip_ply(&mesh, format);
        assert_eq!(back.points, mesh.points);
        assert_eq!(back.faces, mesh.faces);
    }
}

#[test]
fn ply_without_faces() {
    let cloud = PointCloud::new("c", vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-1.5, 0.0, 1e-300)]);
    let back = roundtrip_ply(&cloud, PlyFormat::BinaryLittleEndian);
    assert_eq!(back.points, cloud.points);
    assert!(back.faces.is_none());
}

#[test]
fn ply_skips_extra_properties_and_fans_polygons() {
    let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 4\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty list uchar int tags\nelement face 1\nproperty uchar flags\nproperty list uchar uint vertex_indices\nelement extra 1\nproperty int foo\nend_header\n9 0 0 0 255 2 7 7\n9 1 0 0 0 0\n9 1 1 0 1 1 5\n9 0 1 0 2 0\n1 4 0 1 2 3\n42\n";
    let c = read_ply_from(text.as_bytes(), "hand").unwrap();
    assert_eq!(c.points, vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(1.0, 1.0, 0.0), Point3::new(0.0, 1.0, 0.0)]);
    assert_eq!(c.faces.unwrap(), vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn binary_ply_with_mixed_types() {
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty ushort quality\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
    for (i, p) in [[0.0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.5]].iter().enumerate() {
        for v in p {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&(i as u16).to_le_bytes());
    }
    bytes.push(3);
    for i in [2i32, 1, 0] {
        bytes.extend_from_slice(&i.to_le_bytes());
    }
    let c = read_ply_from(bytes.as_slice(), "b").unwrap();
    assert_eq!(c.points[2], Point3::new(0.0, 2.0, 0.5));
    assert_eq!(c.faces.unwrap(), vec![[2, 1, 0]]);
}

#[test]
fn ply_errors() {
    let be = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
    assert!(matches!(read_ply_from(be.as_bytes(), "x"), Err(FormatError::BigEndian)));
    assert!(matches!(read_ply_from("plx\n".as_bytes(), "x"), Err(FormatError::PlyHeader(_))));
    let no_z = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
    assert!(matches!(read_ply_from(no_z.as_bytes(), "x"), Err(FormatError::PlyHeader(_))));
    let short = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
    assert!(matches!(read_ply_from(short.as_bytes(), "x"), Err(FormatError::PlyBody(_))));
    let bad_face = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n3 0 0 5\n";
    assert!(matches!(read_ply_from(bad_face.as_bytes(), "x"), Err(FormatError::Invalid(_))));
}

#[test]
fn off_roundtrip_and_comments() {
    let mesh = icosphere(1);
    let mut buf = Vec::new();
    write_off_to(&mut buf, &mesh).unwrap();
    let back = read_off_from(buf.as_slice(), "rt").unwrap();
    assert_eq!(back.points, mesh.points);
    assert_eq!(back.faces, mesh.faces);

    let text = "OFF 4 1 0\n# a square\n0 0 0\n1 0 0\n1 1 0 # corner\n0 1 0\n4 0 1 2 3 255 0 0\n";
    let c = read_off_from(text.as_bytes(), "sq").unwrap();
    assert_eq!(c.faces.unwrap(), vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn off_errors_name_the_line() {
    let err = read_off_from("OFF\n2 0 0\n0 0 0\n1 x 0\n".as_bytes(), "e").unwrap_err();
    assert!(matches!(err, FormatError::Off { line: 4, .. }), "{err}");
    assert!(read_off_from("COFF\n".as_bytes(), "e").is_err());
    assert!(read_off_from("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1\n".as_bytes(), "e").is_err());
}

#[test]
fn files_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = icosphere(1);
    for name in ["m.ply", "m.off"] {
        let path = dir.path().join(name);
        write_cloud(&path, &mesh).unwrap();
        let back = read_cloud(&path).unwrap();
        assert_eq!(back.points, mesh.points);
        assert_eq!(back.id, "m");
    }
    assert!(matches!(write_cloud(&dir.path().join("m.obj"), &mesh), Err(FormatError::Extension(_))));
}

#[test]
fn transform_files_roundtrip() {
    let t = SimilarityTransform::new(3.7, rotation_zyx(0.4, -1.1, 2.9), Vector3::new(1.0 / 3.0, -2.0, 1e-17));
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("t.json");
    write_transform_json(&json, &t).unwrap();
    assert_eq!(read_transform(&json).unwrap(), t);

    let txt = dir.path().join("t.txt");
    write_matrix_text(&txt, &t).unwrap();
    let back = read_transform(&txt).unwrap();
    assert!((back.to_homogeneous() - t.to_homogeneous()).norm() < 1e-12);
    assert!((back.scale - 3.7).abs() < 1e-12);
}

#[test]
fn transform_json_layout() {
    let t = SimilarityTransform::from_translation(Vector3::new(0.0, 0.0, 1.0));
    let v: serde_json::Value = serde_json::from_str(&transform_to_json(&t)).unwrap();
    assert_eq!(v["scale"], 1.0);
    assert_eq!(v["rotation"].as_array().unwrap().len(), 9);
    assert_eq!(v["translation"][2], 1.0);
}

#[test]
fn invalid_transforms_are_rejected() {
    let bad = TransformJson { scale: 1.0, rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0], translation: [0.0; 3] };
    assert!(bad.to_transform().is_err());
    assert!(parse_matrix_text("1 0 0 0 0 1 0 0 0 0 1 0 0 0 0").is_err());
    assert!(parse_matrix_text("1 0 0 0 0 1 0 0 0 0 1 0 1 0 0 1").is_err());
    assert!(parse_matrix_text("2 0 0 1 0 2 0 2 0 0 2 3 0 0 0 1").unwrap().scale - 2.0 < 1e-12);
}
