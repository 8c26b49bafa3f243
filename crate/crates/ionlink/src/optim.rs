//! Small derivative-free minimizer used for the local-unitary fidelity search
//! and the angle refinements in the CHSH tests.

/// Options for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    /// Stop when the simplex objective spread drops below this.
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Edge length of the initial simplex around the start point.
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { f_tol: 1e-9, max_iterations: 2000, initial_step: 0.35 }
    }
}

/// Outcome of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the standard Nelder-Mead simplex
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NmOptions) -> NmResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim > 0, "empty start point");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;

        // Order by value; keep the sort stable so ties break deterministically.
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = idx[0];
        let worst = idx[dim];
        let second_worst = idx[dim - 1];

        if values[worst] - values[best] < opts.f_tol {
            converged = true;
            break;
        }

        // Centroid of all points except the worst.
        let mut centroid = vec![0.0; dim];
        for (k, v) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi / dim as f64;
            }
        }

        let lerp = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let reflected = lerp(1.0);
        let f_reflected = f(&reflected);

        if f_reflected < values[best] {
            let expanded = lerp(2.0);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] { lerp(0.5) } else { lerp(-0.5) };
            let f_contracted = f(&contracted);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink towards the best vertex.
                let best_point = simplex[best].clone();
                for (k, v) in simplex.iter_mut().enumerate() {
                    if k == best {
                        continue;
                    }
                    for (vi, &bi) in v.iter_mut().zip(&best_point) {
                        *vi = bi + 0.5 * (*vi - bi);
                    }
                    values[k] = f(v);
                }
            }
        }
    }

    let (argmin, _) = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .unwrap();
    NmResult {
        x: simplex[argmin].clone(),
        value: values[argmin],
        iterations,
        converged,
    }
}
