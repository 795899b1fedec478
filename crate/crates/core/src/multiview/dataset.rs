//! Synthetic multiview data: views of one system that agree on a declared index set.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::rng;
use crate::solver::{integrate, TimeGrid, Trajectory, TrajectoryRecord};
use crate::systems::OdeSystem;

/// Two or three views. Views 0 and 1 share `shared_indices`; in a triple, views 0 and 2
/// share `secondary_indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewPair {
    pub views: Vec<Trajectory>,
    pub shared_indices: Vec<usize>,
    pub secondary_indices: Option<Vec<usize>>,
}

impl MultiviewPair {
    /// Generating parameters of each view (metadata, never seen by training).
    pub fn theta_truth(&self) -> Vec<Option<&[f64]>> {
        self.views.iter().map(|v| v.theta_truth.as_deref()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    shared: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    secondary: Option<Vec<usize>>,
    views: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub shared: Vec<usize>,
    /// Present for triples: the index set shared by views 0 and 2.
    pub secondary: Option<Vec<usize>>,
    /// Each initial-state component is scaled by `1 + U(-jitter, jitter)` per view.
    pub jitter: f64,
}

impl SynthOptions {
    pub fn pairs(shared: Vec<usize>) -> Self {
        Self {
            shared,
            secondary: None,
            jitter: 0.0,
        }
    }
}

fn check_index_set(name: &str, set: &[usize], n: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} index set is empty: nothing is shared")));
    }
    if set.iter().any(|&i| i >= n) {
        return Err(Error::invalid(format!("{name} index set has entries outside 0..{n}")));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == n {
        return Err(Error::invalid(format!(
            "{name} index set covers every parameter: nothing to disentangle"
        )));
    }
    if sorted.len() != set.len() {
        return Err(Error::invalid(format!("{name} index set has repeated entries")));
    }
    Ok(())
}

pub fn generate_multiview_dataset(system: &OdeSystem, shared: &[usize], n_pairs: usize, seed: u64) -> Result<Vec<MultiviewPair>> {
    generate_multiview_dataset_with(system, &SynthOptions::pairs(shared.to_vec()), n_pairs, seed)
}

/// Draw `θ` once per pair, resample the components outside each shared set for the other
/// views, and integrate every view on the catalog grid. Deterministic given `seed`.
pub fn generate_multiview_dataset_with(
    system: &OdeSystem,
    opts: &SynthOptions,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<MultiviewPair>> {
    let n = system.param_dim;
    check_index_set("shared", &opts.shared, n)?;
    if let Some(sec) = &opts.secondary {
        check_index_set("secondary", sec, n)?;
    }
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    if !(0.0..1.0).contains(&opts.jitter) {
        return Err(Error::invalid("jitter must lie in [0, 1)"));
    }
    let grid = TimeGrid::uniform(0.0, system.t_max, system.grid_points)?;
    let stream = rng::stage_seed(seed, &format!("multiview/{}", system.id));
    let bx = &system.param_box;

    (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::rng_from(rng::item_seed(stream, i as u64));
            let theta = bx.sample(&mut r);
            let mut thetas = vec![theta.clone()];
            let mut sets = vec![&opts.shared];
            if let Some(sec) = &opts.secondary {
                sets.push(sec);
            }
            for set in sets {
                let fresh = bx.sample(&mut r);
                let view: Vec<f64> = (0..n).map(|j| if set.contains(&j) { theta[j] } else { fresh[j] }).collect();
                thetas.push(view);
            }
            let views = thetas
                .iter()
                .map(|th| {
                    let x0: Vec<f64> = system
                        .initial_state
                        .iter()
                        .map(|v| {
                            if opts.jitter > 0.0 {
                                v * (1.0 + r.random_range(-opts.jitter..opts.jitter))
                            } else {
                                *v
                            }
                        })
                        .collect();
                    integrate(system, th, &x0, &grid).map(Trajectory::without_derivs)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MultiviewPair {
                views,
                shared_indices: opts.shared.clone(),
                secondary_indices: opts.secondary.clone(),
            })
        })
        .collect()
}

pub fn write_dataset(path: &Path, pairs: &[MultiviewPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        let rec = PairRecord {
            shared: p.shared_indices.clone(),
            secondary: p.secondary_indices.clone(),
            views: p.views.iter().map(TrajectoryRecord::from).collect(),
        };
        out.push_str(&json::to_string(&rec)?);
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<MultiviewPair>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: Error| Error::Format(format!("{}:{}: {e}", path.display(), i + 1));
        let rec: PairRecord = serde_json::from_str(&line).map_err(|e| at(e.into()))?;
        if !(2..=3).contains(&rec.views.len()) || (rec.views.len() == 3) != rec.secondary.is_some() {
            return Err(at(Error::Format("a record needs 2 views, or 3 views with a secondary set".into())));
        }
        let views = rec
            .views
            .into_iter()
            .map(Trajectory::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(at)?;
        out.push(MultiviewPair {
            views,
            shared_indices: rec.shared,
            secondary_indices: rec.secondary,
        });
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{}: dataset is empty", path.display())));
    }
    Ok(out)
}
