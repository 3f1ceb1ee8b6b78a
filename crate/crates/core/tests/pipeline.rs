use microgest::detect::tad_detect_run;
use microgest::pipeline::{
    calibrate, encode_signal, infer, segment_samples, train_classifier, PipelineConfig,
};
use microgest::snn::{SnnConfig, SnnModel, StageOps};
use microgest::synth::{calibration_session, generate_dataset, generate_stream, SynthConfig};
use microgest::train::TrainConfig;
use microgest::{CalibrationProfile64, PipelineConfig32, PipelineConfig64};

fn synth() -> SynthConfig {
    SynthConfig { classes: 3, actions_per_class: 12, ..SynthConfig::default() }
}

fn profile(cfg: &SynthConfig, pipe: &PipelineConfig64) -> CalibrationProfile64 {
    let s = calibration_session::<f64>(cfg, 3).unwrap();
    calibrate(&s.neutral, &s.action, pipe).unwrap().0
}

fn small_snn() -> SnnConfig<f64> {
    SnnConfig { hidden: 32, population: 10, ..SnnConfig::default() }
}

#[test]
fn oracle_segments_train_a_classifier_that_beats_chance() {
    let cfg = synth();
    let pipe = PipelineConfig::default();
    let prof = profile(&cfg, &pipe);
    let data = generate_dataset::<f64>(&cfg, 11, 0.6667).unwrap();
    assert_eq!(data.train.len() + data.test.len(), 36);

    let snn = small_snn();
    let train = segment_samples(&data.train, &prof, &pipe, &snn).unwrap();
    let test = segment_samples(&data.test, &prof, &pipe, &snn).unwrap();
    let tcfg = TrainConfig { epochs: 20, batch_size: 8, seed: 4, ..TrainConfig::default() };
    let out = train_classifier(&train, &test, cfg.classes, &snn, &tcfg).unwrap();

    assert_eq!(out.log.len(), 20);
    assert!(out.log.last().unwrap().mean_loss < out.log[0].mean_loss);
    assert!(out.best_test_acc() > 0.5, "best test accuracy {}", out.best_test_acc());
}

#[test]
fn inference_predictions_follow_detected_segments() {
    let cfg = synth();
    let pipe = PipelineConfig::default();
    let prof = profile(&cfg, &pipe);
    let stream = generate_stream::<f64>(&cfg, 21).unwrap();
    let snn = small_snn();
    let h = snn.solver.input_dim(cfg.channels, pipe.encoder.n_trains);
    let model = SnnModel::init(h, cfg.classes, &snn, 5).unwrap();

    let report = infer(&stream.signal, &prof, &model, &pipe).unwrap();
    let spikes = encode_signal(&stream.signal, &prof, &pipe).unwrap();
    let run = tad_detect_run(&spikes, &pipe.tad).unwrap();

    assert_eq!(report.predictions.len(), run.segments.len());
    assert_eq!(report.ops, run.ops);
    for (p, s) in report.predictions.iter().zip(&run.segments) {
        assert_eq!((p.onset_sample, p.length), (s.onset_sample, s.length));
        assert!(p.class_id < cfg.classes);
        assert_eq!(p.class_sums.len(), cfg.classes);
        assert!((pipe.tad.l_min..=pipe.tad.l_max).contains(&p.length));
    }
    let fc_out: u64 = report.predictions.iter().map(|p| p.energy.stages.fc_out.ac).sum();
    assert_eq!(report.energy.stages.fc_out.ac, fc_out);
    assert_eq!(report.energy.total_fj, report.energy.ac_count * 100 + report.energy.mac_count * 3200);
}

#[test]
fn quiet_stream_spends_only_encode_and_detect_energy() {
    let cfg = SynthConfig { actions_per_class: 0, ..synth() };
    let pipe = PipelineConfig::default();
    let prof = profile(&cfg, &pipe);
    let stream = generate_stream::<f64>(&SynthConfig { stream_ms: Some(20_000.0), ..cfg.clone() }, 2).unwrap();
    let snn = small_snn();
    let h = snn.solver.input_dim(cfg.channels, pipe.encoder.n_trains);
    let model = SnnModel::init(h, cfg.classes, &snn, 5).unwrap();

    let report = infer(&stream.signal, &prof, &model, &pipe).unwrap();
    assert!(report.predictions.is_empty());
    let s = report.energy.stages;
    for stage in [s.fc_in, s.lif_hidden, s.fc_out, s.lif_out] {
        assert_eq!(stage, StageOps::default());
    }
    assert!(s.encode.ac > 0);
}

#[test]
fn single_precision_pipeline_tracks_double_precision() {
    let cfg = synth();
    let pipe64 = PipelineConfig::default();
    let pipe32 = PipelineConfig32::default();
    let s64 = calibration_session::<f64>(&cfg, 3).unwrap();
    let s32 = calibration_session::<f32>(&cfg, 3).unwrap();
    let (p64, t64) = calibrate(&s64.neutral, &s64.action, &pipe64).unwrap();
    let (p32, t32) = calibrate(&s32.neutral, &s32.action, &pipe32).unwrap();
    assert!((t64.theta - f64::from(t32.theta)).abs() < 1e-6);

    let a = generate_stream::<f64>(&cfg, 9).unwrap();
    let b = generate_stream::<f32>(&cfg, 9).unwrap();
    let d64 = tad_detect_run(&encode_signal(&a.signal, &p64, &pipe64).unwrap(), &pipe64.tad).unwrap();
    let d32 = tad_detect_run(&encode_signal(&b.signal, &p32, &pipe32).unwrap(), &pipe32.tad).unwrap();
    assert_eq!(d64.segments.len(), d32.segments.len());
    for (x, y) in d64.segments.iter().zip(&d32.segments) {
        assert!(x.onset_sample.abs_diff(y.onset_sample) <= 5);
        assert!(x.length.abs_diff(y.length) <= 10);
    }
}
