use gdrkit::modelfile::{decode, encode, load_model, save_model, ModelFileError, MAGIC};
use gdrkit_core::bench::desk_preset;
use gdrkit_core::gradcheck::small_net_config;
use gdrkit_core::model::{Method, TinyNet};
use gdrkit_core::rng::RngStream;

fn sample() -> (gdrkit_core::model::TrainConfig, TinyNet) {
    let mut cfg = desk_preset(Method::F, 12);
    cfg.net = small_net_config();
    let net = TinyNet::init(cfg.net, &mut RngStream::new(3)).unwrap();
    (cfg, net)
}

#[test]
fn round_trip_is_exact() {
    let (cfg, net) = sample();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bin");
    save_model(&p, &cfg, &net).unwrap();
    let back = load_model(&p).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.net.params(), net.params());
}

#[test]
fn corruption_detected() {
    let (cfg, net) = sample();
    let bytes = encode(&cfg, &net);
    assert_eq!(bytes[..8], MAGIC);

    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(matches!(decode(&bad), Err(ModelFileError::BadMagic)));

    let mut bad = bytes.clone();
    bad[8] = 99;
    assert!(matches!(decode(&bad), Err(ModelFileError::UnsupportedVersion(_))));

    assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(ModelFileError::Truncated)));
    assert!(matches!(decode(&bytes[..10]), Err(ModelFileError::Truncated)));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(
        load_model(std::path::Path::new("/definitely/not/here.bin")),
        Err(ModelFileError::Io { .. })
    ));
}
