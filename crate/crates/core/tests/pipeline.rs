use ltsp_core::model::*;
use ltsp_core::phantom::{make_phantom, Phantom, TreeSpec};
use ltsp_core::pipeline::*;
use ltsp_core::volio::{normalize_hu, Volume};
use ltsp_tensor::OpKind;
use proptest::prelude::*;

fn tiny_net() -> LtspNetConfig {
    LtspNetConfig { cube: 16, channels: [4, 6, 8, 10], coarse_channels: 6, ..LtspNetConfig::default() }
}

fn small_spec(seed: u64) -> TreeSpec {
    TreeSpec {
        seed,
        depth: 3,
        root_radius: 2.5,
        segment_length: 9.0,
        volume_extent: [32; 3],
        ..TreeSpec::default()
    }
}

fn case(p: &Phantom) -> Case {
    Case { intensity: p.intensity.clone(), mask: p.mask.clone() }
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 1, steps_per_epoch: Some(2), seed, net: tiny_net(), ..TrainConfig::default() }
}

#[test]
fn one_step_run_yields_a_loadable_checkpoint() {
    let p = make_phantom(&small_spec(1)).unwrap();
    let cfg = TrainConfig { steps_per_epoch: Some(1), ..tiny_config(0) };
    let out = train(&[case(&p)], &cfg, &mut ()).unwrap();
    assert_eq!(out.log.len(), 1);
    assert!(out.log[0].loss.is_finite() && (0.0..=1.0).contains(&out.log[0].loss));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&out.net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(encode_checkpoint(&back), encode_checkpoint(&out.net));
    assert_eq!(back.ablation(), Ablation::TwoSlicesCells);
}

#[test]
fn fixed_seed_gives_bit_identical_checkpoints_and_logs() {
    let cases: Vec<Case> = (0..2).map(|s| case(&make_phantom(&small_spec(s)).unwrap())).collect();
    let cfg = TrainConfig { epochs: 2, ..tiny_config(7) };
    let a = train(&cases, &cfg, &mut ()).unwrap();
    let b = train(&cases, &cfg, &mut ()).unwrap();
    assert_eq!(encode_checkpoint(&a.net), encode_checkpoint(&b.net));
    assert_eq!(a.log, b.log);
    let c = train(&cases, &TrainConfig { seed: 8, ..cfg }, &mut ()).unwrap();
    assert_ne!(encode_checkpoint(&a.net), encode_checkpoint(&c.net));
}

#[test]
fn training_lowers_the_loss_on_one_case() {
    let p = make_phantom(&small_spec(3)).unwrap();
    let cfg = TrainConfig { epochs: 6, steps_per_epoch: Some(5), augment: false, ..tiny_config(1) };
    let out = train(&[case(&p)], &cfg, &mut ()).unwrap();
    let means = epoch_means(&out.log);
    assert_eq!(means.len(), 6);
    assert!(means[5] < means[0], "epoch means {means:?}");
}

#[test]
fn observer_sees_every_step_and_can_abort() {
    struct Count(usize, usize);
    impl TrainObserver for Count {
        fn on_step(&mut self, _: &StepLog) -> ltsp_core::Result<()> {
            self.0 += 1;
            Ok(())
        }
        fn on_epoch(&mut self, _: usize, _: &LtspNet<f32>) -> ltsp_core::Result<()> {
            self.1 += 1;
            Ok(())
        }
    }
    struct Abort;
    impl TrainObserver for Abort {
        fn on_step(&mut self, _: &StepLog) -> ltsp_core::Result<()> {
            Err(ltsp_core::CoreError::Config("stop".into()))
        }
    }
    let p = make_phantom(&small_spec(2)).unwrap();
    let cfg = TrainConfig { epochs: 2, ..tiny_config(0) };
    let mut count = Count(0, 0);
    train(&[case(&p)], &cfg, &mut count).unwrap();
    assert_eq!((count.0, count.1), (4, 2));
    assert!(train(&[case(&p)], &cfg, &mut Abort).is_err());
}

#[test]
fn training_rejects_empty_input_and_bad_configs() {
    assert!(train(&[], &tiny_config(0), &mut ()).is_err());
    let p = make_phantom(&small_spec(2)).unwrap();
    let bad = TrainConfig { learning_rate: 0.0, ..tiny_config(0) };
    assert!(train(&[case(&p)], &bad, &mut ()).is_err());
}

#[test]
fn single_window_matches_direct_forward() {
    let mut net = LtspNet::<f32>::new(tiny_net(), Ablation::TwoSlicesCells, 4).unwrap();
    let p = make_phantom(&small_spec(4)).unwrap();
    let vol = normalize_hu(&p.intensity.crop([8, 8, 8], [16; 3]).unwrap()).unwrap();
    let plan = SlidingWindowPlan::new([16; 3], [16; 3], [8; 3]).unwrap();
    assert_eq!(plan.windows(), vec![[0, 0, 0]]);
    let (prob, pred) = sliding_window_infer(&mut net, &vol, &plan).unwrap();
    let direct = direct_infer(&mut net, &vol).unwrap();
    assert_eq!(prob.as_scalar().unwrap(), direct.as_slice());
    let expect: Vec<u8> = direct.iter().map(|&q| u8::from(q > THRESHOLD)).collect();
    assert_eq!(pred.as_labels().unwrap(), expect.as_slice());
}

#[test]
fn window_order_does_not_change_the_result() {
    let mut net = LtspNet::<f32>::new(tiny_net(), Ablation::TwoSlicesCells, 5).unwrap();
    let p = make_phantom(&small_spec(5)).unwrap();
    let vol = normalize_hu(&p.intensity).unwrap();
    let plan = SlidingWindowPlan::new([32; 3], [16; 3], [8; 3]).unwrap();
    let n = plan.windows().len();
    assert_eq!(n, 27);
    let forward: Vec<usize> = (0..n).collect();
    let shuffled: Vec<usize> = (0..n).map(|i| (i * 11 + 5) % n).collect();
    let a = sliding_window_infer_ordered(&mut net, &vol, &plan, &forward).unwrap();
    let b = sliding_window_infer_ordered(&mut net, &vol, &plan, &shuffled).unwrap();
    let c = sliding_window_infer_ordered(&mut net, &vol, &plan, &forward.iter().rev().copied().collect::<Vec<_>>()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(sliding_window_infer_ordered(&mut net, &vol, &plan, &forward[1..]).is_err());
}

#[test]
fn inference_restores_the_training_mode_and_needs_normalized_input() {
    let mut net = LtspNet::<f32>::new(tiny_net(), Ablation::TwoSlicesCells, 5).unwrap();
    let p = make_phantom(&small_spec(5)).unwrap();
    let plan = SlidingWindowPlan::new([32; 3], [16; 3], [16; 3]).unwrap();
    assert!(sliding_window_infer(&mut net, &p.intensity, &plan).is_err());
    net.set_training(true);
    sliding_window_infer(&mut net, &normalize_hu(&p.intensity).unwrap(), &plan).unwrap();
    assert!(net.norms().iter().all(|(_, n)| n.training));
}

#[test]
fn plan_rejects_invalid_strides_and_cubes() {
    assert!(SlidingWindowPlan::new([32; 3], [16; 3], [0; 3]).is_err());
    assert!(SlidingWindowPlan::new([32; 3], [16; 3], [17; 3]).is_err());
    assert!(SlidingWindowPlan::new([12, 32, 32], [16; 3], [8; 3]).is_err());
}

#[test]
fn last_window_is_clamped_to_the_border() {
    let plan = SlidingWindowPlan::new([40, 16, 16], [16; 3], [16; 3]).unwrap();
    let s: Vec<usize> = plan.windows().iter().map(|o| o[0]).collect();
    assert_eq!(s, vec![0, 16, 24]);
}

proptest! {
    #[test]
    fn every_voxel_is_visited(
        ext in prop::array::uniform3(1usize..40),
        frac in prop::array::uniform3(0.05f64..1.0),
        sfrac in prop::array::uniform3(0.05f64..1.0),
    ) {
        let cube: [usize; 3] = std::array::from_fn(|a| ((ext[a] as f64 * frac[a]).ceil() as usize).clamp(1, ext[a]));
        let stride: [usize; 3] = std::array::from_fn(|a| ((cube[a] as f64 * sfrac[a]).ceil() as usize).clamp(1, cube[a]));
        let plan = SlidingWindowPlan::new(ext, cube, stride).unwrap();
        let counts = plan.visit_counts();
        prop_assert_eq!(counts.len(), ext.iter().product::<usize>());
        prop_assert!(counts.iter().all(|&c| c >= 1));
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        prop_assert_eq!(total, (plan.windows().len() * cube.iter().product::<usize>()) as u64);
    }
}

fn foreground_set(v: &Volume) -> Vec<bool> {
    v.as_labels().unwrap().iter().map(|&l| l != 0).collect()
}

#[test]
fn half_stride_prediction_stays_within_two_percent_of_full_stride() {
    let p = make_phantom(&TreeSpec::default().with_seed(50)).unwrap();
    let mut net = LtspNet::<f32>::new(LtspNetConfig::default(), Ablation::TwoSlicesCells, 9).unwrap();
    let vol = normalize_hu(&p.intensity).unwrap();
    let full = SlidingWindowPlan::new([96; 3], [64; 3], [64; 3]).unwrap();
    let half = SlidingWindowPlan::new([96; 3], [64; 3], [32; 3]).unwrap();
    // with the last window clamped, both strides tile 96 as {0, 32}
    assert_eq!(full.windows(), half.windows());
    let (_, a) = sliding_window_infer(&mut net, &vol, &full).unwrap();
    let (_, b) = sliding_window_infer(&mut net, &vol, &half).unwrap();
    let (sa, sb) = (foreground_set(&a), foreground_set(&b));
    let diff = sa.iter().zip(&sb).filter(|(x, y)| x != y).count();
    let size = sa.iter().filter(|&&x| x).count().max(1);
    assert!(diff as f64 <= 0.02 * size as f64, "symmetric difference {diff} of {size} voxels");
}

#[test]
fn gradcheck_passes_on_fresh_init() {
    let report = run_gradcheck(&GradcheckConfig::default()).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.groups.len(), ParamGroup::ALL.len());
    assert!(report.groups.iter().all(|g| g.samples.len() == 5));
}

#[test]
fn gradcheck_names_the_group_behind_a_corrupted_cell_gate() {
    let cfg = GradcheckConfig { fault: Some(OpKind::Sigmoid), seed: 1, ..GradcheckConfig::default() };
    let report = run_gradcheck(&cfg).unwrap();
    assert!(!report.passed());
    let failing = report.failing();
    assert!(failing.contains(&ParamGroup::Cell), "{report}");
    // parameters downstream of every gate are untouched by the fault
    assert!(!failing.contains(&ParamGroup::Fine), "{report}");
    assert!(report.to_string().contains("FAIL"));
}

#[test]
fn gradcheck_table_is_deterministic() {
    let cfg = GradcheckConfig { seed: 3, samples_per_group: 2, ..GradcheckConfig::default() };
    let a = run_gradcheck(&cfg).unwrap();
    let b = run_gradcheck(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_string(), b.to_string());
}

#[test]
fn kink_aware_difference_skips_steps_that_cross_a_kink() {
    // |w - 1e-9| has a kink just beside w = 0; the largest step crosses it
    let f = |w: f64| -> ltsp_core::Result<(f64, u64)> { Ok(((w - 1e-9).abs() + 3.0 * w, u64::from(w > 1e-9))) };
    let (n, h) = kink_aware_difference(f, 0.5, 1, &[1.0, 1e-1, 1e-3]).unwrap();
    assert!((n - 4.0).abs() < 1e-9, "{n}");
    assert_eq!(h, 0.1);
    let (n, h) = kink_aware_difference(f, 0.0, 0, &[1e-3, 1e-12]).unwrap();
    assert!((n - 2.0).abs() < 1e-6, "{n}");
    assert_eq!(h, 1e-12);
}

#[test]
fn train_config_round_trips_and_rejects_unknown_keys() {
    let cfg = TrainConfig {
        epochs: 3,
        steps_per_epoch: Some(7),
        seed: 11,
        ablation: Ablation::OneSliceCells,
        augment: false,
        net: LtspNetConfig { cube: 32, ..LtspNetConfig::default() },
        ..TrainConfig::default()
    };
    assert_eq!(TrainConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
    assert_eq!(TrainConfig::from_kv("").unwrap(), TrainConfig::default());
    let err = TrainConfig::from_kv("epochs = 3\nlearnig_rate = 0.1\n").unwrap_err();
    assert!(err.to_string().contains("learnig_rate"), "{err}");
    assert!(TrainConfig::from_kv("ablation = three_slices\n").is_err());
    assert!(TrainConfig::from_kv("epochs = -1\n").is_err());
}

#[test]
fn step_log_lines_parse_back() {
    let l = StepLog { epoch: 2, step: 17, loss: 0.125 };
    assert_eq!(l.to_string(), "epoch=2 step=17 loss=0.125000");
    assert_eq!(StepLog::parse(&l.to_string()), Some(l));
    assert_eq!(StepLog::parse("epoch=2 step=x loss=1"), None);
    assert_eq!(StepLog::parse("epoch=2 loss=1"), None);
    let log = [
        StepLog { epoch: 1, step: 1, loss: 1.0 },
        StepLog { epoch: 1, step: 2, loss: 0.5 },
        StepLog { epoch: 2, step: 3, loss: 0.25 },
    ];
    assert_eq!(epoch_means(&log), vec![0.75, 0.25]);
}
