use super::*;
use crate::datagen::SamplingSpec;
use crate::hand::default_hand;
use crate::policy::{GraspEnv, RewardWeights};
use crate::sim::{ObservableState, Sim, SimConfig};
use crate::skill::SkillConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_layout() -> BcLayout {
    BcLayout {
        depth: 9,
        contacts: 4,
        proprio: 15,
        action: 14,
        encoded: 4,
        steps: 75,
    }
}

fn random_obs(rng: &mut ChaCha8Rng, l: &BcLayout) -> ObservableState {
    ObservableState {
        depth: (0..l.depth).map(|_| rng.gen_range(0.2f32..0.8)).collect(),
        contact_bits: (0..l.contacts).map(|_| rng.gen()).collect(),
        proprio: (0..l.proprio).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn random_data(n: usize, seed: u64) -> BcData<f64> {
    let l = small_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = BcData::new(l);
    for _ in 0..n {
        let obs = random_obs(&mut rng, &l);
        let a: Vec<f64> = (0..l.action).map(|_| rng.gen_range(-0.1..0.1)).collect();
        d.push_pair(&obs, d.len() % 75, &a).unwrap();
    }
    d
}

fn env() -> GraspEnv {
    GraspEnv {
        sim: Sim::new(SimConfig::default(), default_hand()),
        skill: SkillConfig::default(),
        sampling: SamplingSpec::default(),
        reward: RewardWeights::default(),
    }
}

#[test]
fn normalizer_matches_two_pass_statistics() {
    let rows = [1.0, 10.0, 3.0, 10.0, 5.0, 10.0];
    let n = Normalizer::<f64>::fit(&rows, 2);
    assert!((n.mean[0] - 3.0).abs() < 1e-12 && (n.mean[1] - 10.0).abs() < 1e-12);
    // population variance of {1, 3, 5} is 8/3
    assert!((n.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    // constant column hits the floor
    assert!((n.std[1] - VAR_FLOOR.sqrt()).abs() < 1e-15);
    let mut x = vec![3.0, 10.0 + 1.0];
    n.apply(&mut x);
    assert_eq!(x, vec![0.0, 10.0]);
    let mut y = vec![0.5, -0.25];
    let orig = y.clone();
    n.apply(&mut y);
    n.invert(&mut y);
    assert!((y[0] - orig[0]).abs() < 1e-12);
}

#[test]
fn features_follow_the_layout() {
    let l = small_layout();
    let obs = random_obs(&mut ChaCha8Rng::seed_from_u64(1), &l);
    let f = features::<f64>(&obs, 0.25);
    assert_eq!(f.len(), l.input_dim());
    assert_eq!(f[0], obs.depth[0] as f64);
    assert_eq!(f[l.depth], if obs.contact_bits[0] { 1.0 } else { 0.0 });
    assert_eq!(f[l.depth + l.contacts], obs.proprio[0]);
    assert_eq!(f[l.depth + l.contacts + 12], obs.proprio[7]);
    assert_eq!(f[l.input_dim() - 1], 0.25);
    assert_eq!(BcLayout::default_hand().input_dim(), 1024 + 4 + 20 + 1);
    assert_eq!(BcLayout::default_hand().trunk_input(), 64 + 4 + 20 + 1);
}

#[test]
fn layout_mismatch_is_rejected() {
    let mut d = BcData::<f64>::new(small_layout());
    let obs = random_obs(&mut ChaCha8Rng::seed_from_u64(2), &BcLayout::default_hand());
    assert!(matches!(d.push_pair(&obs, 0, &[0.0; 14]), Err(BcError::Layout(_))));
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let data = random_data(5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = BcPolicy::<f64>::init(small_layout(), &[6], &mut rng).unwrap();
    let (x, y) = (data.x.clone(), data.y.clone());
    let (_, g) = p.loss_and_grad(&x, &y, 5).unwrap();
    let ne = p.encoder.param_count();
    let h = 1e-6;
    for k in (0..p.param_count()).step_by(7) {
        let bump = |p: &mut BcPolicy<f64>, d: f64| {
            let (e, t) = p.params_mut();
            if k < ne {
                e[k] += d
            } else {
                t[k - ne] += d
            }
        };
        bump(&mut p, h);
        let lp = p.loss(&x, &y, 5).unwrap();
        bump(&mut p, -2.0 * h);
        let lm = p.loss(&x, &y, 5).unwrap();
        bump(&mut p, h);
        let fd = (lp - lm) / (2.0 * h);
        assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: fd {fd} vs {}", g[k]);
    }
}

#[test]
fn exact_targets_give_zero_loss() {
    let data = random_data(4, 5);
    let p = BcPolicy::<f64>::init(small_layout(), &[8], &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let y = p.forward_batch(&data.x, 4).unwrap().output().to_vec();
    let (loss, g) = p.loss_and_grad(&data.x, &y, 4).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn memorizes_a_small_dataset() {
    let data = random_data(8, 7);
    let cfg = BcConfig {
        learning_rate: 3e-3,
        epochs: 3000,
        minibatch: 8,
        hidden: vec![32],
        encoded: 4,
    };
    let (p, report) = train_bc(&data, &cfg, 1, |_, _| {}).unwrap();
    assert!(report.final_loss <= 1e-6, "{}", report.final_loss);
    assert_eq!(report.samples, 8);
    // the denormalized prediction reproduces the recorded action
    let l = small_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let obs = random_obs(&mut rng, &l);
    let recorded: Vec<f64> = (0..l.action).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let a = p.act(&obs, 0).unwrap().to_vec();
    for (u, v) in a.iter().zip(&recorded) {
        assert!((u - v).abs() <= 1e-3 * 0.2, "{u} vs {v}");
    }
}

#[test]
fn joint_targets_are_learned_as_offsets() {
    let l = small_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let obs = random_obs(&mut rng, &l);
    let a: Vec<f64> = (0..l.action).map(|i| i as f64 * 0.1).collect();
    let y = l.target(&obs.proprio, &a);
    assert_eq!(y[..6], a[..6]);
    for j in 0..8 {
        assert_eq!(y[6 + j], a[6 + j] - obs.proprio[7 + j]);
    }
    let back = l.action(&obs.proprio, &y);
    for (u, v) in back.iter().zip(&a) {
        assert!((u - v).abs() <= 1e-15);
    }
}

#[test]
fn full_batch_training_lowers_loss() {
    let data = random_data(32, 8);
    let cfg = BcConfig {
        learning_rate: 1e-3,
        epochs: 40,
        minibatch: 32,
        hidden: vec![16],
        encoded: 4,
    };
    let (_, r) = train_bc(&data, &cfg, 2, |_, _| {}).unwrap();
    // one minibatch per epoch, so each entry is the pre-step loss
    assert!(r.epoch_losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", r.epoch_losses);
    assert!(r.final_loss < r.epoch_losses[0]);
}

#[test]
fn training_is_seed_deterministic() {
    let data = random_data(16, 9);
    let cfg = BcConfig {
        epochs: 3,
        minibatch: 5,
        hidden: vec![8],
        encoded: 4,
        ..BcConfig::default()
    };
    let a = train_bc(&data, &cfg, 3, |_, _| {}).unwrap();
    let b = train_bc(&data, &cfg, 3, |_, _| {}).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_dataset_is_an_error() {
    let d = BcData::<f32>::new(BcLayout::default_hand());
    assert!(matches!(train_bc(&d, &BcConfig::default(), 0, |_, _| {}), Err(BcError::EmptyDataset)));
    let mut cfg = BcConfig::default();
    cfg.minibatch = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn csv_and_totals() {
    let rows = vec![
        EvalRow {
            phi_id: "a".into(),
            successes: 3,
            trials: 5,
        },
        EvalRow {
            phi_id: "b".into(),
            successes: 0,
            trials: 5,
        },
    ];
    assert_eq!(eval_csv(&rows), "phi_id,successes,trials,rate\na,3,5,0.6000\nb,0,5,0.0000\n");
    let t = total("all", &rows);
    assert_eq!((t.successes, t.trials), (3, 10));
    assert_eq!(t.rate(), 0.3);
}

#[test]
fn trial_seeds_are_shared_and_distinct() {
    assert_eq!(trial_seed(4, 1, 2), trial_seed(4, 1, 2));
    let mut seen = std::collections::HashSet::new();
    for s in 0..10 {
        for t in 0..10 {
            assert!(seen.insert(trial_seed(4, s, t)));
        }
    }
}

#[test]
fn trials_are_reproducible() {
    let env = env();
    let p = BcPolicy::<f32>::init(BcLayout::default_hand(), &[16], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let phi = [0.03, 0.03, 0.06, 1.0, 1.0];
    let a = run_trial(&env, &p, phi, 77);
    assert!(a.is_some());
    assert_eq!(a, run_trial(&env, &p, phi, 77));
}

#[test]
fn generated_held_out_shapes_are_far_and_valid() {
    let env = env();
    let spec = ExperimentSpec {
        ood_count: 4,
        ..ExperimentSpec::default()
    }
    .with_generated_ood(&env);
    assert_eq!(spec.ood.len(), 4);
    assert!(spec.validate(&env.sampling).is_ok());
    for phi in &spec.ood {
        assert!(shape_distance(phi, &spec.phi_star, &env.sampling) > spec.ood_radius);
    }
    let mut near = spec.clone();
    near.ood[0] = near.phi_star;
    assert!(matches!(near.validate(&env.sampling), Err(ExperimentError::Invalid(_))));
}

proptest! {
    #[test]
    fn normalized_distance_is_a_metric(a in prop::array::uniform5(0.0f64..1.0), b in prop::array::uniform5(0.0f64..1.0)) {
        let s = SamplingSpec::default();
        let to_phi = |u: [f64; 5]| {
            let r = [s.lateral_axis, s.lateral_axis, s.vertical_axis, s.eps, s.eps];
            let mut p = [0.0; 5];
            for k in 0..5 { p[k] = r[k][0] + u[k] * (r[k][1] - r[k][0]); }
            p
        };
        let (pa, pb) = (to_phi(a), to_phi(b));
        let d = shape_distance(&pa, &pb, &s);
        let oracle = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!((d - oracle).abs() < 1e-9);
        prop_assert!((d - shape_distance(&pb, &pa, &s)).abs() < 1e-15);
    }
}

fn fake_report() -> ExperimentReport {
    let row = |id: &str, s| EvalRow {
        phi_id: id.into(),
        successes: s,
        trials: 5,
    };
    let result = |c, id, ood: [usize; 2]| ConditionResult {
        condition: c,
        train: BcTrainReport {
            epoch_losses: vec![1.0, 0.5],
            final_loss: 0.4,
            samples: 10,
            episodes: 2,
        },
        id: vec![row("id-0", id)],
        ood: vec![row("ood-0", ood[0]), row("ood-1", ood[1])],
    };
    ExperimentReport {
        spec: ExperimentSpec {
            ood: vec![[0.05, 0.05, 0.1, 2.0, 2.0], [0.02, 0.02, 0.1, 0.1, 0.1]],
            ..ExperimentSpec::default()
        },
        results: vec![
            result(Condition::Narrow, 5, [1, 0]),
            result(Condition::Augmented, 2, [3, 2]),
            result(Condition::Mixed, 5, [4, 4]),
        ],
    }
}

#[test]
fn report_formats_are_stable() {
    let r = fake_report();
    assert_eq!(r.text(), fake_report().text());
    let csv = r.csv();
    assert!(csv.starts_with("condition,set,phi_id,successes,trials,rate\n"));
    assert!(csv.contains("mixed,ood,ood-1,4,5,0.8000\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
    let text = r.text();
    assert!(text.contains("mixed OOD"));
    assert!(text.contains("real-only"));
    assert!(r.directional_checks().iter().all(|(_, ok)| *ok));
    assert_eq!(r.get(Condition::Mixed).unwrap().ood_total().successes, 8);
}
