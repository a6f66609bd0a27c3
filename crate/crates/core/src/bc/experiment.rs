//! Narrow vs. augmented vs. mixed training data, compared on one held-in
//! shape and a set of held-out shapes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{eval_policy, format_table, total, EvalRow, EvalShape};
use super::model::BcLayout;
use super::train::{train_bc, BcConfig, BcData, BcError, BcTrainReport};
use crate::datagen::{for_each_record, start_seeded, DatasetError, SamplingSpec};
use crate::policy::GraspEnv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Narrow,
    Augmented,
    Mixed,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Narrow, Condition::Augmented, Condition::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Narrow => "narrow",
            Condition::Augmented => "augmented",
            Condition::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    /// The single training shape of the narrow condition.
    pub phi_star: [f64; 5],
    /// Held-out shapes; generated when empty.
    pub ood: Vec<[f64; 5]>,
    pub ood_count: usize,
    /// Minimum normalized distance of a held-out shape from `phi_star`.
    pub ood_radius: f64,
    pub narrow_episodes: usize,
    pub augmented_episodes: usize,
    pub trials: usize,
    pub bc: BcConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            phi_star: [0.025, 0.04, 0.05, 0.3, 0.3],
            ood: Vec::new(),
            ood_count: 10,
            ood_radius: 0.3,
            narrow_episodes: 40,
            augmented_episodes: 4000,
            trials: 5,
            bc: BcConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("dataset {path}: {source}")]
    Dataset { path: String, source: DatasetError },
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

/// Coordinates scaled to `[0, 1]` by the sampling ranges.
pub fn normalized_shape(phi: &[f64; 5], s: &SamplingSpec) -> [f64; 5] {
    let r = [s.lateral_axis, s.lateral_axis, s.vertical_axis, s.eps, s.eps];
    let mut out = [0.0; 5];
    for k in 0..5 {
        out[k] = (phi[k] - r[k][0]) / (r[k][1] - r[k][0]);
    }
    out
}

pub fn shape_distance(a: &[f64; 5], b: &[f64; 5], s: &SamplingSpec) -> f64 {
    let (na, nb) = (normalized_shape(a, s), normalized_shape(b, s));
    na.iter().zip(&nb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl ExperimentSpec {
    /// Fills `ood` with shapes from the sampling distribution that lie outside
    /// the radius and admit a reachable grasp.
    pub fn with_generated_ood(mut self, env: &GraspEnv) -> Self {
        if !self.ood.is_empty() {
            return self;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x00d0_00d0);
        while self.ood.len() < self.ood_count {
            let phi = env.sampling.sample_shape(&mut rng).to_array();
            if shape_distance(&phi, &self.phi_star, &env.sampling) <= self.ood_radius {
                continue;
            }
            let probe = GraspEnv {
                sampling: SamplingSpec {
                    fixed_shape: Some(phi),
                    ..env.sampling.clone()
                },
                ..env.clone()
            };
            if start_seeded(&probe, rng.gen()).is_some() {
                self.ood.push(phi);
            }
        }
        self
    }

    pub fn validate(&self, sampling: &SamplingSpec) -> Result<(), ExperimentError> {
        self.bc.validate().map_err(ExperimentError::Invalid)?;
        if self.trials == 0 || self.ood.is_empty() {
            return Err(ExperimentError::Invalid("need at least one trial and one held-out shape".into()));
        }
        for (i, phi) in self.ood.iter().enumerate() {
            let d = shape_distance(phi, &self.phi_star, sampling);
            if d <= self.ood_radius {
                return Err(ExperimentError::Invalid(format!(
                    "held-out shape {i} lies {d:.3} from the training shape (radius {})",
                    self.ood_radius
                )));
            }
        }
        Ok(())
    }

    pub fn id_shapes(&self) -> Vec<EvalShape> {
        vec![EvalShape {
            id: "id-0".into(),
            phi: self.phi_star,
        }]
    }

    pub fn ood_shapes(&self) -> Vec<EvalShape> {
        self.ood
            .iter()
            .enumerate()
            .map(|(i, phi)| EvalShape {
                id: format!("ood-{i}"),
                phi: *phi,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub train: BcTrainReport,
    pub id: Vec<EvalRow>,
    pub ood: Vec<EvalRow>,
}

impl ConditionResult {
    pub fn id_total(&self) -> EvalRow {
        total("total-id", &self.id)
    }

    pub fn ood_total(&self) -> EvalRow {
        total("total-ood", &self.ood)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub results: Vec<ConditionResult>,
}

/// Reference totals from the real-robot comparison this experiment mirrors:
/// `(label, ID successes/trials, OOD successes/trials)`.
pub const REFERENCE_TOTALS: [(&str, (usize, usize), (usize, usize)); 3] = [
    ("real-only", (5, 5), (1, 10)),
    ("mixed", (5, 5), (10, 10)),
    ("sim-only", (0, 5), (0, 10)),
];

pub const SCOPE_NOTES: &str = "\
Scope notes:
- The narrow condition stands in for a small set of real demonstrations: all of
  its episodes use one fixed shape. Augmented data samples the full shape
  distribution; mixed is the union of both.
- Every condition is trained and evaluated in the same simulator, so there is no
  domain gap. Only the generalization axis (held-in vs. held-out shapes) is
  tested; transfer to hardware is not.
- Held-out shapes differ only in geometry (size and exponents).
";

impl ExperimentReport {
    pub fn get(&self, c: Condition) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.condition == c)
    }

    /// Directional checks: augmented and mixed held-out rates at least the
    /// narrow rate, and the narrow held-in rate at least its held-out rate.
    pub fn directional_checks(&self) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        if let Some(n) = self.get(Condition::Narrow) {
            let nr = n.ood_total().rate();
            for c in [Condition::Augmented, Condition::Mixed] {
                if let Some(r) = self.get(c) {
                    let rr = r.ood_total().rate();
                    out.push((format!("{} OOD {:.3} >= narrow OOD {:.3}", c.name(), rr, nr), rr >= nr));
                }
            }
            let ir = n.id_total().rate();
            out.push((format!("narrow ID {:.3} >= narrow OOD {:.3}", ir, nr), ir >= nr));
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("condition,set,phi_id,successes,trials,rate\n");
        for r in &self.results {
            for (set, rows) in [("id", &r.id), ("ood", &r.ood)] {
                for row in rows.iter() {
                    s.push_str(&format!(
                        "{},{},{},{},{},{:.4}\n",
                        r.condition.name(),
                        set,
                        row.phi_id,
                        row.successes,
                        row.trials,
                        row.rate()
                    ));
                }
            }
        }
        s
    }

    pub fn text(&self) -> String {
        let mut s = String::from("Grasp success: narrow vs. augmented vs. mixed training data\n\n");
        s.push_str(SCOPE_NOTES);
        s.push('\n');
        let fmt = |p: [f64; 5]| format!("[{:.4}, {:.4}, {:.4}, {:.3}, {:.3}]", p[0], p[1], p[2], p[3], p[4]);
        s.push_str(&format!("held-in shape id-0: {}\n", fmt(self.spec.phi_star)));
        for (i, p) in self.spec.ood.iter().enumerate() {
            s.push_str(&format!("held-out shape ood-{i}: {}\n", fmt(*p)));
        }
        s.push('\n');
        for r in &self.results {
            s.push_str(&format!(
                "{}: {} episodes, {} samples, final train loss {:.6}\n",
                r.condition.name(),
                r.train.episodes,
                r.train.samples,
                r.train.final_loss
            ));
        }
        s.push('\n');
        let rows: Vec<Vec<EvalRow>> = self
            .results
            .iter()
            .map(|r| {
                let mut v = r.id.clone();
                v.extend(r.ood.iter().cloned());
                v.push(r.id_total());
                v.push(r.ood_total());
                v
            })
            .collect();
        let cols: Vec<(&str, &[EvalRow])> = self
            .results
            .iter()
            .zip(&rows)
            .map(|(r, v)| (r.condition.name(), v.as_slice()))
            .collect();
        s.push_str(&format_table(&cols));
        s.push_str("\nReference totals from the real-robot comparison (not asserted):\n");
        for (name, id, ood) in REFERENCE_TOTALS {
            s.push_str(&format!(
                "  {:<10} ID {}/{}  OOD {}/{}\n",
                name, id.0, id.1, ood.0, ood.1
            ));
        }
        s.push_str("\nDirectional checks:\n");
        for (desc, ok) in self.directional_checks() {
            s.push_str(&format!("  [{}] {}\n", if ok { "PASS" } else { "FAIL" }, desc));
        }
        s
    }
}

/// Loads episodes from one or more dataset directories.
pub fn load_bc_data(dirs: &[&Path], layout: BcLayout) -> Result<BcData<f32>, ExperimentError> {
    let mut data = BcData::new(layout);
    for dir in dirs {
        let mut err = None;
        for_each_record(dir, |r| {
            if err.is_none() {
                if let Err(e) = data.push_record(&r) {
                    err = Some(e);
                }
            }
        })
        .map_err(|source| ExperimentError::Dataset {
            path: dir.display().to_string(),
            source,
        })?;
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    Ok(data)
}

/// Trains one policy per condition and evaluates each on the shared shapes
/// with shared trial seeds.
pub fn run_experiment(
    env: &GraspEnv,
    spec: &ExperimentSpec,
    narrow_dir: &Path,
    augmented_dir: &Path,
) -> Result<ExperimentReport, ExperimentError> {
    spec.validate(&env.sampling)?;
    let layout = BcLayout {
        steps: env.skill.episode_steps(),
        ..BcLayout::default_hand()
    };
    let narrow = load_bc_data(&[narrow_dir], layout)?;
    if narrow.shapes.iter().any(|p| *p != spec.phi_star) {
        return Err(ExperimentError::Invalid("narrow dataset contains episodes of other shapes".into()));
    }
    let id_shapes = spec.id_shapes();
    let ood_shapes = spec.ood_shapes();
    let mut results = Vec::new();

    let mut evaluate = |c: Condition, data: &BcData<f32>| -> Result<(), ExperimentError> {
        if data.shapes.iter().any(|p| spec.ood.contains(p)) {
            return Err(ExperimentError::Invalid(format!(
                "{} training data contains a held-out shape",
                c.name()
            )));
        }
        log::info!("{}: training on {} samples", c.name(), data.len());
        let (policy, train) = train_bc(data, &spec.bc, spec.seed, |e, l| log::debug!("{} epoch {e} loss {l:.6}", c.name()))?;
        log::info!("{}: final loss {:.6}; evaluating", c.name(), train.final_loss);
        let id = eval_policy(env, &policy, &id_shapes, spec.trials, spec.seed);
        let ood = eval_policy(env, &policy, &ood_shapes, spec.trials, spec.seed);
        results.push(ConditionResult {
            condition: c,
            train,
            id,
            ood,
        });
        Ok(())
    };

    evaluate(Condition::Narrow, &narrow)?;
    let mut data = load_bc_data(&[augmented_dir], layout)?;
    evaluate(Condition::Augmented, &data)?;
    data.extend(&narrow);
    evaluate(Condition::Mixed, &data)?;
    drop(data);

    Ok(ExperimentReport {
        spec: spec.clone(),
        results,
    })
}
