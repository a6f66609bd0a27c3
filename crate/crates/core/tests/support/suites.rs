//! Property suites with independent oracles. Shared by the core integration
//! tests and the acceptance runner; each returns a one-line summary or the
//! first violation.

#![allow(dead_code)]

use std::path::Path;

use graspforge::bc::{BcLayout, BcPolicy};
use graspforge::datagen::read_dataset;
use graspforge::geometry::{ray_intersect, Ray, Superquadric};
use graspforge::hand::default_hand;
use graspforge::math::{Pose, Quat, Vec3};
use graspforge::policy::{
    gae, normalize_advantages, param_count, ppo_update, Batch, GaussianPolicy, GraspEnv, Mlp, PpoConfig,
    PpoOptimizer,
};
use graspforge::sim::{Sim, SimConfig};
use graspforge::skill::{compose_action, grasp_pose, pregrasp_pose, GraspAxis, ReferenceTrajectory, SkillConfig, SkillParam};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type V3 = Vec3<f64>;
pub type SuiteResult = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_shape(rng: &mut ChaCha8Rng) -> Superquadric<f64> {
    Superquadric::new(
        rng.gen_range(0.02..0.05),
        rng.gen_range(0.02..0.05),
        rng.gen_range(0.05..0.10),
        rng.gen_range(0.1..2.0),
        rng.gen_range(0.1..2.0),
    )
    .unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose<f64> {
    let axis = V3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    Pose::new(
        Quat::from_axis_angle(axis, rng.gen_range(-3.0..3.0)),
        V3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)),
    )
}

/// Inside-outside function written out from the closed form.
fn oracle_f(s: &Superquadric<f64>, p: V3) -> f64 {
    let x = (p.x / s.a1).abs().powf(2.0 / s.eps2);
    let y = (p.y / s.a2).abs().powf(2.0 / s.eps2);
    let z = (p.z / s.a3).abs().powf(2.0 / s.eps1);
    (x + y).powf(s.eps2 / s.eps1) + z - 1.0
}

/// First entry of a ray into the shape by dense marching in the object frame,
/// refined by bisection. Also returns the smallest `F` seen along the ray.
fn oracle_ray(s: &Superquadric<f64>, pose: &Pose<f64>, o: V3, d: V3, t_max: f64) -> (Option<f64>, f64) {
    let inv = pose.inverse();
    let (lo, ld) = (inv.transform_point(o), inv.transform_vector(d));
    let f = |t: f64| oracle_f(s, lo + ld * t);
    let step = 2e-5;
    let n = (t_max / step).ceil() as usize;
    let mut prev = f(0.0);
    let mut min_f = prev;
    let mut hit = None;
    for k in 1..=n {
        let t = k as f64 * step;
        let ft = f(t);
        min_f = min_f.min(ft);
        if hit.is_none() && prev > 0.0 && ft <= 0.0 {
            let (mut a, mut b) = (t - step, t);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if f(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            hit = Some(0.5 * (a + b));
        }
        prev = ft;
    }
    (hit, min_f)
}

/// Implicit/parametric consistency, normals against finite differences and
/// ray casting against a dense march.
pub fn geometry_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_f = 0.0f64;
    for i in 0..10_000 {
        let s = random_shape(&mut rng);
        let eta = rng.gen_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2);
        let omega = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p = s.surface_point(eta, omega);
        let f = oracle_f(&s, p);
        worst_f = worst_f.max(f.abs());
        ensure!(f.abs() <= 1e-6, "surface sample {i}: |F| = {f:e} for {:?} at ({eta}, {omega})", s.to_array());
    }

    let mut worst_cos = 1.0f64;
    let mut n_ok = 0;
    while n_ok < 1000 {
        let s = random_shape(&mut rng);
        // Stay off the poles and the equator corners, where F is not differentiable.
        let eta: f64 = rng.gen_range(-1.3..1.3);
        let omega: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let q = omega / std::f64::consts::FRAC_PI_2;
        if (q - q.round()).abs() < 0.05 || eta.abs() < 0.05 {
            continue;
        }
        let p = s.surface_point(eta, omega);
        let n = s.surface_normal(p).map_err(|e| format!("normal at {p:?}: {e}"))?;
        let h = 1e-7;
        let g = V3::new(
            oracle_f(&s, p + V3::new(h, 0.0, 0.0)) - oracle_f(&s, p - V3::new(h, 0.0, 0.0)),
            oracle_f(&s, p + V3::new(0.0, h, 0.0)) - oracle_f(&s, p - V3::new(0.0, h, 0.0)),
            oracle_f(&s, p + V3::new(0.0, 0.0, h)) - oracle_f(&s, p - V3::new(0.0, 0.0, h)),
        );
        let cos = n.dot(g) / g.norm();
        worst_cos = worst_cos.min(cos);
        ensure!(cos >= 1.0 - 1e-5, "normal {n_ok}: cosine {cos} for {:?} at ({eta}, {omega})", s.to_array());
        n_ok += 1;
    }

    let mut rays = 0;
    let (mut hits, mut worst_d, mut ambiguous) = (0, 0.0f64, 0);
    while rays < 1000 {
        let s = random_shape(&mut rng);
        let pose = random_pose(&mut rng);
        let dir = V3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalized();
        let o = pose.position - dir * 0.3
            + V3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
        let (want, min_f) = oracle_ray(&s, &pose, o, dir, 0.6);
        // Rays that graze within the march resolution have no reliable oracle.
        if min_f.abs() < 1e-3 || oracle_f(&s, pose.inverse().transform_point(o)) <= 0.0 {
            ambiguous += 1;
            continue;
        }
        let got = ray_intersect(&Ray::new(o, dir), &s, &pose);
        match (want, got) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                hits += 1;
                worst_d = worst_d.max((a - b).abs());
                ensure!((a - b).abs() <= 1e-5, "ray {rays}: distance {b} vs oracle {a}");
            }
            _ => return Err(format!("ray {rays}: hit {got:?} vs oracle {want:?} for {:?}", s.to_array())),
        }
        rays += 1;
    }
    Ok(format!(
        "max |F| {worst_f:.1e}, min normal cosine 1-{:.1e}, {hits}/1000 rays hit, max ray error {worst_d:.1e} m ({ambiguous} grazing rays redrawn)",
        1.0 - worst_cos
    ))
}

/// Reference endpoints, zero-residual tracking with no object in reach and
/// contact-target soundness.
pub fn skill_suite(seed: u64) -> SuiteResult {
    let hand = default_hand();
    let sim = Sim::new(SimConfig::default(), hand.clone());
    let cfg = SkillConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planned = 0;
    let mut tracked = 0;
    let mut draws = 0;
    let mut worst_track = 0.0f64;
    while planned < 500 {
        draws += 1;
        ensure!(draws <= 2000, "only {planned} reachable grasps in {draws} draws");
        let s = random_shape(&mut rng);
        let rest = sim.reset(s, Pose::identity()).map_err(|e| e.to_string())?.object_pose;
        let z = SkillParam {
            approach_elevation: rng.gen_range(70f64..90.0).to_radians(),
            approach_azimuth: rng.gen_range(0.0..std::f64::consts::TAU),
            grasp_axis: if s.a1 <= s.a2 { GraspAxis::X } else { GraspAxis::Y },
            standoff: 0.1,
        };
        let Ok(plan) = grasp_pose(&s, &rest, &z, &hand, &cfg) else {
            continue;
        };
        planned += 1;
        let normals: Vec<V3> = plan.contacts.iter().map(|c| s.surface_normal(*c).unwrap()).collect();
        for c in &plan.contacts {
            let f = oracle_f(&s, *c);
            ensure!(f.abs() <= 1e-6, "contact target off the surface: |F| = {f:e}");
        }
        let thumb = hand.thumb();
        let others: V3 = normals
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != thumb)
            .fold(V3::zero(), |a, (_, n)| a + *n)
            .normalized();
        let opp = normals[thumb].dot(others);
        ensure!(opp < -0.3, "thumb opposition {opp} for {:?}", s.to_array());

        let x0 = pregrasp_pose(&plan.pose, &z, &hand, &cfg);
        let traj = ReferenceTrajectory::new(x0, plan.pose.clone(), cfg.horizon).map_err(|e| e.to_string())?;
        ensure!(traj.reference_at(0).unwrap() == traj.x0, "reference does not start at x0");
        ensure!(traj.reference_at(cfg.horizon).unwrap() == plan.pose, "reference does not end at x_g");
        if planned % 25 == 0 {
            // Object moved out of reach.
            let far = Pose::new(rest.rotation, rest.position + V3::new(5.0, 5.0, 0.0));
            let mut st = sim.reset(s, far).map_err(|e| e.to_string())?;
            st = sim.place_hand(&st, &traj.x0);
            let zero = vec![0.0; 6 + hand.joint_count()];
            for t in 0..cfg.horizon {
                let a = compose_action(
                    &traj.reference_at(t).unwrap(),
                    &traj.reference_at(t + 1).unwrap(),
                    &zero,
                    &hand,
                    &cfg,
                );
                st = sim.step(&st, &a).map_err(|e| e.to_string())?;
            }
            let err = (st.hand.palm.position - plan.pose.palm.position).norm();
            worst_track = worst_track.max(err);
            ensure!(err <= 1e-6, "zero-residual rollout ends {err} m from x_g");
            tracked += 1;
        }
    }
    Ok(format!(
        "{planned} plans from {draws} draws, {tracked} tracked rollouts (max error {worst_track:.1e} m)"
    ))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Network and BC-loss gradients against central differences.
pub fn gradient_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for c in 0..20 {
        let sizes = [rng.gen_range(1..6), rng.gen_range(1..8), rng.gen_range(1..8), rng.gen_range(1..4)];
        let params = (0..param_count(&sizes)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let net = Mlp::from_params(&sizes, params).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..sizes[3]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |n: &Mlp<f64>, x: &[f64]| n.forward(x).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let (gp, gx) = net.backward(&x, &w).unwrap();
        for k in 0..net.param_count() {
            let (mut a, mut b) = (net.clone(), net.clone());
            a.params_mut()[k] += h;
            b.params_mut()[k] -= h;
            let e = rel_err((loss(&a, &x) - loss(&b, &x)) / (2.0 * h), gp[k]);
            worst = worst.max(e);
            ensure!(e <= 1e-4, "mlp config {c} param {k}: relative error {e:e}");
        }
        for k in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[k] += h;
            b[k] -= h;
            let e = rel_err((loss(&net, &a) - loss(&net, &b)) / (2.0 * h), gx[k]);
            worst = worst.max(e);
            ensure!(e <= 1e-4, "mlp config {c} input {k}: relative error {e:e}");
        }
    }
    for c in 0..20 {
        let layout = BcLayout {
            depth: rng.gen_range(4..16),
            contacts: 4,
            proprio: rng.gen_range(2..8),
            action: rng.gen_range(2..6),
            encoded: rng.gen_range(2..6),
            steps: 75,
        };
        let mut p = BcPolicy::<f64>::init(layout, &[rng.gen_range(3..9)], &mut rng).unwrap();
        let batch = rng.gen_range(1..5);
        let x: Vec<f64> = (0..batch * layout.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..batch * layout.action).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = p.loss_and_grad(&x, &y, batch).unwrap();
        let ne = p.encoder.param_count();
        for k in 0..p.param_count() {
            let bump = |p: &mut BcPolicy<f64>, d: f64| {
                let (e, t) = p.params_mut();
                if k < ne {
                    e[k] += d
                } else {
                    t[k - ne] += d
                }
            };
            bump(&mut p, h);
            let lp = p.loss(&x, &y, batch).unwrap();
            bump(&mut p, -2.0 * h);
            let lm = p.loss(&x, &y, batch).unwrap();
            bump(&mut p, h);
            let e = rel_err((lp - lm) / (2.0 * h), g[k]);
            worst = worst.max(e);
            ensure!(e <= 1e-4, "bc config {c} param {k}: relative error {e:e}");
        }
    }
    Ok(format!("20 MLP and 20 BC configurations, max relative error {worst:.1e}"))
}

/// Advantages by explicit discounted sums of TD residuals.
fn brute_gae(r: &[f64], v: &[f64], d: &[bool], g: f64, l: f64) -> Vec<f64> {
    (0..r.len())
        .map(|t| {
            let (mut sum, mut w) = (0.0, 1.0);
            for k in t..r.len() {
                let live = if d[k] { 0.0 } else { 1.0 };
                sum += w * (r[k] + g * v[k + 1] * live - v[k]);
                if d[k] {
                    break;
                }
                w *= g * l;
            }
            sum
        })
        .collect()
}

/// Two-dimensional quadratic bandit with optimum `c` plus the GAE oracle.
pub fn ppo_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..40);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.15)).collect();
        let (g, l) = (rng.gen_range(0.5..1.0), rng.gen_range(0.0..1.0));
        let (adv, _) = gae(&r, &v, &d, g, l).map_err(|e| e.to_string())?;
        for (a, b) in adv.iter().zip(brute_gae(&r, &v, &d, g, l)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-12, "GAE deviates from the oracle by {worst:e}");

    let c = [0.3, -0.5];
    let mut policy = GaussianPolicy::init(&[1, 16, 2], -0.5, &mut rng).unwrap();
    let mut value = Mlp::init(&[1, 16, 1], 1.0, &mut rng).unwrap();
    let cfg = PpoConfig {
        minibatch: 64,
        learning_rate: 3e-3,
        entropy_coeff: 0.0,
        ..Default::default()
    };
    let mut opt = PpoOptimizer::new(&policy, &value, cfg.learning_rate);
    let mut reached = None;
    for update in 1..=200 {
        let mut b = Batch {
            obs_dim: 1,
            act_dim: 2,
            ..Default::default()
        };
        let v0 = value.forward(&[1.0]).unwrap()[0];
        for _ in 0..256 {
            let (a, lp) = policy.sample(&[1.0], &mut rng).unwrap();
            let r = -((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2));
            b.obs.push(1.0);
            b.actions.extend(a);
            b.log_probs.push(lp);
            b.advantages.push(r - v0);
            b.returns.push(r);
        }
        normalize_advantages(&mut b.advantages);
        ppo_update(&mut policy, &mut value, &mut opt, &b, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let mu = policy.mean_action(&[1.0]).unwrap();
        if reached.is_none() && (mu[0] - c[0]).abs() < 0.05 && (mu[1] - c[1]).abs() < 0.05 {
            reached = Some(update);
        }
    }
    let mu = policy.mean_action(&[1.0]).unwrap();
    let err = (mu[0] - c[0]).abs().max((mu[1] - c[1]).abs());
    ensure!(err < 0.05, "bandit mean {mu:?} is {err} from the optimum after 200 updates");
    Ok(format!(
        "GAE max error {worst:.1e}; bandit within 0.05 from update {} (final error {err:.3})",
        reached.unwrap_or(200)
    ))
}

/// Every stored episode replays to success and its draw respects the
/// sampling bounds.
pub fn check_dataset(dir: &Path, env: &GraspEnv) -> SuiteResult {
    let d = read_dataset(dir).map_err(|e| e.to_string())?;
    ensure!(d.records.len() == d.manifest.episodes, "manifest count mismatch");
    for r in &d.records {
        let s = &r.meta.setup;
        let el = s.z.approach_elevation.to_degrees();
        ensure!((70.0 - 1e-9..=90.0 + 1e-9).contains(&el), "episode {}: elevation {el}", r.meta.index);
        let p = s.shape;
        for (name, v, lo, hi) in [
            ("a1", p.a1, 0.02, 0.05),
            ("a2", p.a2, 0.02, 0.05),
            ("a3", p.a3, 0.05, 0.10),
            ("eps1", p.eps1, 0.1, 2.0),
            ("eps2", p.eps2, 0.1, 2.0),
        ] {
            ensure!(v >= lo && v <= hi, "episode {}: {name} = {v} outside [{lo}, {hi}]", r.meta.index);
        }
        ensure!(r.meta.success, "episode {} stored without success", r.meta.index);
        let rep = graspforge::datagen::replay(env, r).map_err(|e| e.to_string())?;
        ensure!(rep.success, "episode {} does not replay to success", r.meta.index);
    }
    Ok(format!("{} episodes replay to success within bounds", d.records.len()))
}
