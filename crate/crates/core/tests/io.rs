use std::fs;

use hexsr_core::image::{HexImage, RasterImage};
use hexsr_core::io::*;
use hexsr_core::optics::ChannelOptics;
use hexsr_core::resample::distance_matrix;
use hexsr_core::sampling::{HexGrid, RectGrid};
use ndarray::Array3;

#[test]
fn png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = RasterImage::new(
        Array3::from_shape_fn((3, 7, 9), |(c, i, j)| ((c * 50 + i * 9 + j * 3) % 256) as f64),
        1.0,
    )
    .unwrap();
    let path = dir.path().join("a.png");
    write_png(&img, &path).unwrap();
    assert_eq!(read_png(&path, 1.0).unwrap(), img);

    let gray = RasterImage::filled(1, 5, 6, 4.0, 77.0);
    let gpath = dir.path().join("g.png");
    write_png(&gray, &gpath).unwrap();
    assert_eq!(read_png(&gpath, 4.0).unwrap(), gray);
    assert!(read_png(&dir.path().join("missing.png"), 1.0).is_err());
}

#[test]
fn hex_container_preserves_samples_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let grid = HexGrid::ideal(4.298, [1.0, 2.0], [(4, 5), (3, 5)]).unwrap();
    let mut img = HexImage::zeros(grid, 3);
    for (k, p) in img.planes.iter_mut().enumerate() {
        for (n, v) in p.iter_mut().enumerate() {
            *v = (k * 1000 + n) as f64 + 0.25;
        }
    }
    let prov = Provenance {
        seed: Some(17),
        sigma: Some(1.0),
        optics: ChannelOptics::rgb().to_vec(),
        source: Some("0801.png".into()),
    };
    let path = dir.path().join("x.hexplanes");
    write_hex_image(&img, prov.clone(), &path).unwrap();
    let (back, p2) = read_hex_image(&path).unwrap();
    assert_eq!(back, img);
    assert_eq!(p2, prov);

    let bytes = fs::read(&path).unwrap();
    let text = String::from_utf8_lossy(&bytes);
    assert!(text.starts_with("HEXSR-PLANES 1\n"));
    let data_start = text.find("%%DATA%%\n").unwrap() + "%%DATA%%\n".len();
    assert_eq!(bytes.len() - data_start, 4 * 3 * (20 + 15));
    // First sample of channel 0, plane 0.
    let first = f32::from_le_bytes(bytes[data_start..data_start + 4].try_into().unwrap());
    assert_eq!(first, 0.25);
}

#[test]
fn corrupt_containers_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = HexGrid::ideal(4.298, [0.0; 2], [(2, 2), (2, 2)]).unwrap();
    let path = dir.path().join("x");
    write_hex_image(&HexImage::zeros(grid, 1), Provenance::default(), &path).unwrap();
    let bytes = fs::read(&path).unwrap();

    let truncated = dir.path().join("t");
    fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_hex_image(&truncated), Err(hexsr_core::Error::Format { .. })));

    let bad_magic = dir.path().join("m");
    let mut b = bytes.clone();
    b[0] = b'X';
    fs::write(&bad_magic, b).unwrap();
    assert!(read_hex_image(&bad_magic).is_err());

    let d = distance_matrix(&[[0.0, 0.0]], &RectGrid::new(1.0, 2, 2, [0.0; 2]).unwrap()).unwrap();
    let dpath = dir.path().join("d");
    write_distance_matrix(&d, &dpath).unwrap();
    assert!(read_hex_image(&dpath).is_err());
    assert!(read_distance_matrix(&path).is_err());
}

#[test]
fn distance_matrix_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let target = RectGrid::new(1.0, 12, 10, [0.5, -0.5]).unwrap();
    let d = distance_matrix(&[[0.0, 0.0], [3.25, 4.0], [9.0, 1.0]], &target).unwrap();
    let path = dir.path().join("d.dist");
    write_distance_matrix(&d, &path).unwrap();
    let back = read_distance_matrix(&path).unwrap();
    assert_eq!(back.target, d.target);
    for (a, b) in back.values.iter().zip(&d.values) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("lr.png");
    let side = sidecar_path(&png);
    assert_ne!(side, png);
    let s = RectSidecar::new(
        &RectGrid::new(4.0, 10, 12, [1.5, 1.5]).unwrap(),
        Provenance {
            seed: Some(3),
            ..Default::default()
        },
    );
    write_toml(&s, &side).unwrap();
    assert_eq!(read_toml::<RectSidecar>(&side).unwrap(), s);
}
