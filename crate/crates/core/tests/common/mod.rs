//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's fitting or estimation code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmcst::Dataset;

/// Nelder–Mead minimizer, restarted from its own optimum until it stops moving.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64) -> Vec<f64> {
    let mut best = x0.to_vec();
    let mut scale = step;
    for _ in 0..50 {
        let next = nm_once(f, &best, scale, tol, 20_000);
        let moved = next.iter().zip(&best).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        best = next;
        if moved < tol {
            break;
        }
        scale = (moved * 10.0).max(tol * 100.0).min(step);
    }
    best
}

fn nm_once(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let k = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..k {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread < tol * 1e-2 {
            break;
        }
        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..k).map(|j| centroid[j] + t * (simplex[k][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[k] = xe;
                vals[k] = fe;
            } else {
                simplex[k] = xr;
                vals[k] = fr;
            }
        } else if fr < vals[k - 1] {
            simplex[k] = xr;
            vals[k] = fr;
        } else {
            let xc = if fr < vals[k] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < vals[k].min(fr) {
                simplex[k] = xc;
                vals[k] = fc;
            } else {
                for i in 1..=k {
                    simplex[i] = (0..k).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let i = (0..=k).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    simplex[i].clone()
}

/// Bernoulli log-likelihood of a logistic model with intercept, from scratch.
pub fn bernoulli_loglik(x: &[Vec<f64>], a: &[u8], beta: &[f64]) -> f64 {
    x.iter()
        .zip(a)
        .map(|(xi, &ai)| {
            let eta = beta[0] + xi.iter().zip(&beta[1..]).map(|(u, b)| u * b).sum::<f64>();
            // log(1 + e^eta), written to avoid overflow
            let log1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            ai as f64 * eta - log1pexp
        })
        .sum()
}

/// Cox log partial likelihood with Breslow ties, by direct enumeration of risk sets.
pub fn breslow_loglik(times: &[f64], status: &[bool], x: &[Vec<f64>], coef: &[f64]) -> f64 {
    let lin = |i: usize| x[i].iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
    (0..times.len())
        .filter(|&i| status[i])
        .map(|i| {
            let denom: f64 = (0..times.len()).filter(|&j| times[j] >= times[i]).map(|j| lin(j).exp()).sum();
            lin(i) - denom.ln()
        })
        .sum()
}

/// Breslow cumulative baseline hazard at `t`, by direct enumeration.
pub fn breslow_baseline(times: &[f64], status: &[bool], x: &[Vec<f64>], coef: &[f64], t: f64) -> f64 {
    let mut event_times: Vec<f64> =
        (0..times.len()).filter(|&i| status[i] && times[i] <= t).map(|i| times[i]).collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();
    event_times
        .iter()
        .map(|&u| {
            let d = (0..times.len()).filter(|&i| status[i] && times[i] == u).count() as f64;
            let r: f64 = (0..times.len())
                .filter(|&j| times[j] >= u)
                .map(|j| x[j].iter().zip(coef).map(|(a, b)| a * b).sum::<f64>().exp())
                .sum();
            d / r
        })
        .sum()
}

/// Classical Nelson–Aalen survival `exp(-sum d/Y)` integrated over `[0, L]`.
pub fn nelson_aalen_rmst(times: &[f64], events: &[bool], l: f64) -> f64 {
    let mut grid: Vec<f64> = times.iter().cloned().filter(|&t| t < l).collect();
    grid.push(0.0);
    grid.push(l);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let cum = |t: f64| -> f64 {
        let mut event_times: Vec<f64> =
            times.iter().zip(events).filter(|(&u, &e)| e && u <= t).map(|(&u, _)| u).collect();
        event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        event_times.dedup();
        event_times
            .iter()
            .map(|&u| {
                let d = times.iter().zip(events).filter(|(&v, &e)| e && v == u).count() as f64;
                let y = times.iter().filter(|&&v| v >= u).count() as f64;
                d / y
            })
            .sum()
    };
    grid.windows(2).map(|w| (w[1] - w[0]) * (-cum(w[0])).exp()).sum()
}

/// Small dataset with `p` standard-normal covariates, logistic treatment and
/// exponential event and censoring times.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * p);
    let (mut treat, mut time, mut event) = (Vec::new(), Vec::new(), Vec::new());
    loop {
        x.clear();
        treat.clear();
        time.clear();
        event.clear();
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
            let eta = 0.3 * row.iter().sum::<f64>();
            let a = u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()));
            let t = -rng.random::<f64>().ln() * (1.0 + 0.5 * a as f64) / (0.2 * row[0]).exp();
            let c = -rng.random::<f64>().ln() * 2.0;
            x.extend(row);
            treat.push(a);
            time.push(t.min(c));
            event.push(t <= c);
        }
        let n1 = treat.iter().filter(|&&a| a == 1).count();
        let cens = |arm: u8| (0..n).filter(|&i| treat[i] == arm && !event[i]).count();
        if n1 >= 3 && n - n1 >= 3 && cens(0) > 0 && cens(1) > 0 {
            break;
        }
    }
    Dataset::new(x, p, treat, time, event).expect("valid random dataset")
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn rows_of(d: &Dataset) -> Vec<Vec<f64>> {
    (0..d.n()).map(|i| d.row(i).to_vec()).collect()
}
