//! Nelder-Mead downhill simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    /// Stop when the spread of objective values across the simplex is below
    /// `rel_tol * |best| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Offset of each initial vertex from the starting point along one axis.
    pub initial_step: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-14, max_iter: 10_000, initial_step: 0.5, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

/// Minimizes `f` from `x0`. NaN objective values are treated as +inf.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], settings: &NelderMeadSettings) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut history = Vec::new();
    let mut start = x0.to_vec();
    let mut iterations = 0;
    let mut result = None;
    for _ in 0..=settings.restarts {
        let (x, value, converged) = run(&mut eval, &start, settings, &mut iterations, &mut history);
        let improved = match &result {
            Some(Minimum { value: prev, .. }) => prev - value > settings.rel_tol * value.abs() + settings.abs_tol,
            None => true,
        };
        let done = !converged || !improved;
        if result.as_ref().is_none_or(|r: &Minimum| value <= r.value) {
            result = Some(Minimum { x: x.clone(), value, iterations, converged, history: Vec::new() });
        }
        if done {
            break;
        }
        start = x;
    }
    let mut min = result.expect("at least one run");
    min.iterations = iterations;
    min.history = history;
    min
}

fn run<F>(
    eval: &mut F,
    x0: &[f64],
    settings: &NelderMeadSettings,
    iterations: &mut usize,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += settings.initial_step;
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut converged = false;
    while *iterations < settings.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst - best <= settings.rel_tol * best.abs() + settings.abs_tol {
            converged = true;
            break;
        }
        *iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, x)| a + SHRINK * (x - a)).collect();
                    let fv = eval(&v);
                    *vertex = (v, fv);
                }
            }
        }
        let current = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        history.push(current);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    (x, value, converged)
}
