use gdrkit::io::{encode_png, load_image, quantize, save_image, IoError};
use gdrkit_core::ImageRgb;
use proptest::prelude::*;

#[test]
fn half_gray_saves_as_128() {
    let img = ImageRgb::filled(3, 2, [0.5, 0.5, 0.5]).unwrap();
    assert!(quantize(&img).iter().all(|&b| b == 128));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.png");
    save_image(&img, &p).unwrap();
    let back = load_image(&p).unwrap();
    assert!(back.data().iter().all(|&v| v == 128.0 / 255.0));
}

#[test]
fn missing_undecodable_and_zero_size_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_image(&dir.path().join("nope.png")), Err(IoError::Missing(_))));

    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not an image at all").unwrap();
    assert!(matches!(load_image(&junk), Err(IoError::Undecodable { .. })));

    let mut bytes = encode_png(&ImageRgb::filled(2, 2, [0.1, 0.2, 0.3]).unwrap());
    bytes[16..20].copy_from_slice(&0u32.to_be_bytes());
    let empty = dir.path().join("empty.png");
    std::fs::write(&empty, bytes).unwrap();
    assert!(matches!(load_image(&empty), Err(IoError::ZeroDimension(_))));
}

#[test]
fn unwritable_target_reported() {
    let img = ImageRgb::filled(1, 1, [0.0; 3]).unwrap();
    let err = save_image(&img, std::path::Path::new("/nonexistent-dir/x.png")).unwrap_err();
    assert!(matches!(err, IoError::Unwritable { .. }));
}

#[test]
fn jpeg_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.jpg");
    image::RgbImage::from_pixel(8, 8, image::Rgb([200, 100, 50])).save(&p).unwrap();
    let img = load_image(&p).unwrap();
    assert_eq!((img.width(), img.height()), (8, 8));
    let px = img.pixel(4, 4);
    assert!((px[0] - 200.0 / 255.0).abs() < 0.03);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_within_half_step(seed in any::<u64>(), w in 1usize..12, h in 1usize..12) {
        let mut rng = gdrkit_core::RngStream::new(seed);
        let img = ImageRgb::from_fn(w, h, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.png");
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-15);
        }
    }
}
