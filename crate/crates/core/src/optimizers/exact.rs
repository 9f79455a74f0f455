//! Exact horizon solver: dynamic programming over the reachable state-of-charge
//! lattice. Actions are discrete and transitions deterministic, so the set of
//! reachable SoC values per step is finite and the DP optimum is global.

use std::collections::HashMap;

use super::{ActionPlan, HorizonModel};
use crate::entities::{BatteryAction, SOC_TOL};
use crate::error::{Error, Result};

/// SoC values closer than this share a lattice node.
const MERGE_TOL: f64 = 1e-9;
/// Relative gap below which two candidate values count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Edge {
    next: usize,
    penalty: f64,
}

fn key(soc: f64) -> i64 {
    (soc / MERGE_TOL).round() as i64
}

/// Optimal plan for the first `horizon_steps` steps of `model`. Ties prefer
/// idle, then discharge.
pub fn solve_exact(model: &HorizonModel, horizon_steps: usize) -> Result<ActionPlan> {
    if horizon_steps > model.len() {
        return Err(Error::HorizonExceedsData { horizon: horizon_steps, available: model.len() });
    }
    if horizon_steps == 0 {
        return Ok(ActionPlan::idle(0));
    }
    let min_eod = model.battery.soc_min_eod - SOC_TOL;

    // forward: reachable lattice and its edges
    let mut layers: Vec<Vec<f64>> = vec![vec![model.initial.soc]];
    let mut edges: Vec<Vec<[Option<Edge>; 3]>> = Vec::with_capacity(horizon_steps);
    for t in 0..horizon_steps {
        let mut next_layer: Vec<f64> = Vec::new();
        let mut index: HashMap<i64, usize> = HashMap::new();
        let mut layer_edges = Vec::with_capacity(layers[t].len());
        for &soc in &layers[t] {
            let mut out = [None; 3];
            for a in BatteryAction::ALL {
                let Some(next) = model.next_soc(soc, a) else { continue };
                let mut penalty = 0.0;
                if model.day_end[t] && next < min_eod {
                    match model.eod_penalty {
                        Some(p) => penalty = p,
                        None => continue,
                    }
                }
                let slot = *index.entry(key(next)).or_insert_with(|| {
                    next_layer.push(next);
                    next_layer.len() - 1
                });
                out[a.index()] = Some(Edge { next: slot, penalty });
            }
            layer_edges.push(out);
        }
        edges.push(layer_edges);
        layers.push(next_layer);
    }

    // backward: best value-to-go per node
    let terminal_ok = |soc: f64| match (model.tail_steps, model.eod_penalty) {
        (Some(tail), None) if horizon_steps == model.len() => model.floor_reachable(soc, tail),
        _ => true,
    };
    let mut value: Vec<f64> =
        layers[horizon_steps].iter().map(|&s| if terminal_ok(s) { 0.0 } else { f64::NEG_INFINITY }).collect();
    let mut choice: Vec<Vec<Option<BatteryAction>>> = vec![Vec::new(); horizon_steps];
    for t in (0..horizon_steps).rev() {
        let mut v_t = Vec::with_capacity(layers[t].len());
        let mut c_t = Vec::with_capacity(layers[t].len());
        for out in &edges[t] {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = None;
            for a in BatteryAction::PREFERENCE {
                let Some(e) = out[a.index()] else { continue };
                let cand = model.rewards[t][a.index()] - e.penalty + value[e.next];
                if cand == f64::NEG_INFINITY {
                    continue;
                }
                if best_a.is_none() || cand > best + TIE_TOL * best.abs().max(1.0) {
                    best = cand;
                    best_a = Some(a);
                }
            }
            v_t.push(best);
            c_t.push(best_a);
        }
        value = v_t;
        choice[t] = c_t;
    }
    if value[0] == f64::NEG_INFINITY {
        return Err(Error::Infeasible);
    }

    // reconstruct and re-score left to right
    let mut node = 0;
    let mut actions = Vec::with_capacity(horizon_steps);
    let mut objective = 0.0;
    for t in 0..horizon_steps {
        let a = choice[t][node].expect("finite value implies a choice");
        let e = edges[t][node][a.index()].expect("chosen edge exists");
        objective += model.rewards[t][a.index()];
        objective -= e.penalty;
        actions.push(a);
        node = e.next;
    }
    Ok(ActionPlan { actions, objective, horizon_steps })
}
