use ddfas::config::ExperimentConfig;
use ddfas::formats::{self, header_len, ChannelReader, ChannelWriter, CodeFile, ModelFile};
use ddfas::pipeline::{self, GeneratedFrames};
use ddfas::HarnessError;
use ddfas_core::predictor::{MicroModel, ModelConfig, Normalizer};

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_frames: 3,
        ..ExperimentConfig::default()
    };
    cfg.channel.n_ports = 3;
    cfg.channel.n_tx = 2;
    cfg.channel.n_doppler = 4;
    cfg.channel.n_delay = 5;
    cfg.channel.n_paths = 4;
    cfg
}

#[test]
fn channel_file_size_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ddch");
    let cfg = tiny();
    pipeline::generate(&cfg, &path).unwrap();
    let len = std::fs::metadata(&path).unwrap().len();
    assert_eq!(len, header_len(5) + 3 * 3 * 2 * 4 * 5 * 16);

    let source = GeneratedFrames::new(&cfg).unwrap();
    let frames = formats::read_channels(&path).unwrap();
    assert_eq!(frames.len(), 3);
    for (q, f) in frames.iter().enumerate() {
        let want = source.generator.frame(q).unwrap();
        assert_eq!(f.frame_index, q);
        assert_eq!(f.data, want.data);
    }

    let again = dir.path().join("d.ddch");
    pipeline::generate(&cfg, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn writer_rejects_wrong_frame_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ddch");
    let source = GeneratedFrames::new(&tiny()).unwrap();
    let frame = source.generator.frame(0).unwrap();
    let mut w = ChannelWriter::create(&path, frame.shape, 2).unwrap();
    w.write_frame(&frame).unwrap();
    assert!(matches!(w.finish(), Err(HarnessError::Format { .. })));
}

#[test]
fn bad_magic_and_truncation_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ddch");
    pipeline::generate(&tiny(), &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();

    let cut = dir.path().join("cut.ddch");
    std::fs::write(&cut, &bytes[..bytes.len() - 8]).unwrap();
    let e = ChannelReader::open(&cut).err().unwrap();
    assert!(matches!(e, HarnessError::Format { .. }));
    assert_eq!(e.exit_code(), 3);

    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    let e = ChannelReader::open(&path).err().unwrap();
    assert!(matches!(e, HarnessError::BadMagic { .. }));
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().contains("bad magic"));

    // A valid file of another kind is also a magic mismatch.
    let codes = dir.path().join("x.ddcd");
    std::fs::write(&codes, b"DDPB1\x01").unwrap();
    assert!(matches!(
        formats::read_codes(&codes),
        Err(HarnessError::BadMagic { .. })
    ));

    let missing = formats::read_basis(&dir.path().join("none.ddpb")).err().unwrap();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn codes_and_basis_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.n_frames = 10;
    let source = GeneratedFrames::new(&cfg).unwrap();
    let c = pipeline::compress_frames(&source, &cfg).unwrap();

    let bp = dir.path().join("b.ddpb");
    formats::write_basis(&bp, &c.basis).unwrap();
    assert_eq!(formats::read_basis(&bp).unwrap(), c.basis);

    let cp = dir.path().join("c.ddcd");
    formats::write_codes(&cp, &c.codes).unwrap();
    let back: CodeFile = formats::read_codes(&cp).unwrap();
    assert_eq!(back, c.codes);
    let len = std::fs::metadata(&cp).unwrap().len();
    assert_eq!(len, header_len(4) + 10 * (c.codes.r_s * c.codes.r_d) as u64 * 16);
}

#[test]
fn model_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ModelConfig::new(4, 3, 2);
    cfg.width = 8;
    cfg.heads = 2;
    cfg.blocks = 1;
    cfg.lora_rank = 2;
    cfg.lora_alpha = 0.75;
    cfg.ffn_mult = 2;
    let mut model = MicroModel::new(cfg, 9).unwrap();
    for (i, p) in model.params.iter_mut().enumerate() {
        *p += 1e-3 * i as f64;
    }
    let file = ModelFile {
        model,
        normalizer: Normalizer {
            mean: vec![0.5, -1.0, 2.0, 0.0],
            std: vec![1.0, 2.0, 0.25, 3.0],
        },
    };
    let path = dir.path().join("m.ddmd");
    formats::write_model(&path, &file).unwrap();
    let back = formats::read_model(&path).unwrap();
    assert_eq!(back, file);
}
