//! Quasi-Newton maximisation with a backtracking line search.

use serde::Serialize;

/// Stopping rules.
#[derive(Clone, Copy, Debug)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// gradient-norm tolerance
    pub gradient_tolerance: f64,
    /// when the line search stalls, accept the point if the gradient norm is
    /// below this
    pub stall_tolerance: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            stall_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reason: String,
}

impl OptimReport {
    pub fn gradient_norm(&self) -> f64 {
        norm(&self.gradient)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `f` from `x0`. `f` returns the value and gradient, or `None`
/// outside the domain. The inverse-Hessian is kept dense.
pub fn maximize<F>(mut f: F, x0: Vec<f64>, opts: &OptimOptions) -> Option<OptimReport>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let m = x0.len();
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() {
        return None;
    }
    let mut x = x0;
    if m == 0 {
        return Some(OptimReport {
            x,
            value: fx,
            gradient: g,
            iterations: 0,
            converged: true,
            reason: "no free parameters".into(),
        });
    }
    // work with the minimisation of −f
    let mut h = vec![0.0; m * m];
    let reset = |h: &mut Vec<f64>, g: &[f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        let scale = 1.0 / norm(g).max(1.0);
        for i in 0..m {
            h[i * m + i] = scale;
        }
    };
    reset(&mut h, &g);
    let mut first = true;
    for it in 0..opts.max_iterations {
        let gn = norm(&g);
        if gn < opts.gradient_tolerance {
            return Some(OptimReport {
                x,
                value: fx,
                gradient: g,
                iterations: it,
                converged: true,
                reason: "gradient tolerance reached".into(),
            });
        }
        // ascent direction p = H g
        let mut p: Vec<f64> = (0..m).map(|i| (0..m).map(|j| h[i * m + j] * g[j]).sum()).collect();
        let mut slope = dot(&p, &g);
        if !(slope > 0.0) {
            reset(&mut h, &g);
            p = (0..m).map(|i| h[i * m + i] * g[i]).collect();
            slope = dot(&p, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if let Some((fnew, gnew)) = f(&xn) {
                if fnew.is_finite() && fnew >= fx + 1e-4 * step * slope {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            let converged = gn < opts.stall_tolerance;
            return Some(OptimReport {
                x,
                value: fx,
                gradient: g,
                iterations: it,
                converged,
                reason: if converged {
                    "line search stalled at numerical precision".into()
                } else {
                    "line search failed".into()
                },
            });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // gradient of −f changes by −(gnew − g)
        let y: Vec<f64> = g.iter().zip(&gnew).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let progress = fnew - fx;
        x = xn;
        fx = fnew;
        g = gnew;
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first {
                // Shanno–Phua scaling of the initial inverse Hessian
                let yy = dot(&y, &y);
                let scale = sy / yy;
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..m {
                    h[i * m + i] = scale;
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..m).map(|i| (0..m).map(|j| h[i * m + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..m {
                for j in 0..m {
                    h[i * m + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if progress.abs() <= 1e-15 * fx.abs().max(1.0) && norm(&g) < opts.stall_tolerance {
            return Some(OptimReport {
                x,
                value: fx,
                gradient: g,
                iterations: it + 1,
                converged: true,
                reason: "objective stationary to machine precision".into(),
            });
        }
    }
    let converged = norm(&g) < opts.gradient_tolerance;
    Some(OptimReport {
        x,
        value: fx,
        gradient: g,
        iterations: opts.max_iterations,
        converged,
        reason: "iteration limit".into(),
    })
}

/// Golden-section maximisation of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
