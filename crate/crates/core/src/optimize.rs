//! Deterministic local minimizers for the calibration search.
//!
//! Nelder-Mead is the default refiner; a finite-difference gradient descent
//! with backtracking is available as the alternative. Both treat an infinite
//! objective value as "outside the feasible box" and stay clear of it.

/// Stopping rules shared by both minimizers.
#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Convergence tolerance on the relative objective change (simplex
    /// spread for Nelder-Mead, per-step improvement for gradient descent).
    pub tolerance: f64,
    /// Absolute spread below which the search counts as converged even when
    /// the objective itself is approaching zero.
    pub absolute_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex with the standard reflection/expansion/contraction/
/// shrink coefficients (1, 2, 0.5, 0.5).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    assert_eq!(x0.len(), steps.len());
    let dim = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;

        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = values[worst] - values[best];
        if spread.is_finite()
            && spread <= opts.tolerance * values[best].abs() + opts.absolute_tolerance
        {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[idx][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
            continue;
        }

        let contract: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
            .collect();
        let f_contract = f(&contract);
        if f_contract < values[worst] {
            simplex[worst] = contract;
            values[worst] = f_contract;
            continue;
        }

        for &idx in order.iter().skip(1) {
            for d in 0..dim {
                simplex[idx][d] =
                    simplex[best][d] + sigma * (simplex[idx][d] - simplex[best][d]);
            }
            values[idx] = f(&simplex[idx]);
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    OptimResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Steepest descent with central-difference gradients and Armijo
/// backtracking. Slower than the simplex on this problem but useful as an
/// independent refinement route.
pub fn gradient_descent<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        let mut grad = vec![0.0; dim];
        for d in 0..dim {
            let h = 1e-7 * x[d].abs().max(1e-2);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[d] += h;
            xm[d] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            grad[d] = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else {
                0.0
            };
        }
        let grad_norm_sq: f64 = grad.iter().map(|g| g * g).sum();
        if grad_norm_sq == 0.0 {
            converged = true;
            break;
        }

        // Backtracking line search along -grad.
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..dim).map(|d| x[d] - step * grad[d]).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx - 1e-4 * step * grad_norm_sq {
                let rel_change = (fx - ft) / fx.abs().max(1e-300);
                x = trial;
                fx = ft;
                improved = true;
                if rel_change <= opts.tolerance {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            converged = true; // no descent direction at this resolution
            break;
        }
        if converged {
            break;
        }
    }

    OptimResult {
        x,
        value: fx,
        iterations,
        converged,
    }
}
