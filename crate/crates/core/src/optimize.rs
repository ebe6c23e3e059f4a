//! Derivative-free Nelder–Mead minimization with restarts.
//!
//! Uses the dimension-adaptive reflection/expansion/contraction/shrink
//! coefficients, which behave better than the classic (1, 2, 1/2, 1/2) set
//! once the dimension exceeds two or three.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Hard cap on objective evaluations, shared across restarts.
    pub max_evals: usize,
    /// Stop when every vertex lies within this sup-norm distance of the best one.
    pub tol: f64,
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 10_000,
            tol: 1e-8,
            initial_step: 0.25,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `start`. Non-finite objective values are
/// treated as `+inf`, so infeasible regions simply repel the simplex.
pub fn nelder_mead<F>(mut f: F, start: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = start.to_vec();
    let mut best_v = eval(&best_x, &mut evals);
    let mut converged = false;

    for round in 0..=opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        let (x, v, conv) = run_simplex(&mut eval, &best_x, best_v, opts, &mut evals);
        let improved = v < best_v;
        if v <= best_v {
            best_x = x;
            best_v = v;
        }
        converged = conv;
        // a restart that finds nothing new confirms the optimum
        if round > 0 && !improved && conv {
            break;
        }
    }

    Minimum {
        x: best_x,
        value: best_v,
        evals,
        converged,
    }
}

fn run_simplex<E>(
    eval: &mut E,
    start: &[f64],
    start_value: f64,
    opts: &NelderMeadOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let n = start.len();
    let nf = n as f64;
    let (alpha, gamma, rho, shrink) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(start_value);
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        values.push(eval(&v, evals));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol {
            return (simplex[best].clone(), values[best], true);
        }
        if *evals >= opts.max_evals {
            return (simplex[best].clone(), values[best], false);
        }

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, evals);
        if fr < values[best] {
            let xe = along(alpha * gamma);
            let fe = eval(&xe, evals);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(alpha * rho);
            let fc = eval(&xc, evals);
            (xc, (fc <= fr).then_some(fc))
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, evals);
            (xc, (fc < values[worst]).then_some(fc))
        };
        if let Some(fc) = fc {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + shrink * (*x - a);
            }
            values[i] = eval(&simplex[i], evals);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn five_dimensional_quadratic() {
        let target = [1.0, -2.0, 0.5, 3.0, -1.0];
        let f = |x: &[f64]| {
            x.iter()
                .zip(&target)
                .enumerate()
                .map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2))
                .sum::<f64>()
        };
        let m = nelder_mead(f, &[0.0; 5], &NelderMeadOptions::default());
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_is_repelled_and_budget_respected() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.3).powi(2) };
        let opts = NelderMeadOptions {
            max_evals: 50,
            ..Default::default()
        };
        let m = nelder_mead(f, &[2.0], &opts);
        assert!(m.evals <= 50 + 2);
        assert!(m.value.is_finite());
    }
}
