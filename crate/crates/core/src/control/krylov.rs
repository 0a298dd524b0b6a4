use crate::dynamics::Pair;

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
    pub min_rayleigh: f64,
    pub converged: bool,
}

fn sub(a: &Pair, b: &Pair) -> Pair {
    let mut out = a.clone();
    out.axpy(-1.0, b);
    out
}

/// Conjugate gradients for a symmetric positive operator, zero initial guess.
/// `tol` is relative to `‖b‖`.
pub(crate) fn cg(apply: &dyn Fn(&Pair) -> Pair, b: &Pair, tol: f64, max_iter: usize) -> (Pair, KrylovStats) {
    let n = b.u.len();
    let mut x = Pair::zeros(n);
    let bnorm = b.norm_sqr().sqrt();
    let mut stats = KrylovStats {
        iterations: 0,
        residual: 0.0,
        min_rayleigh: f64::INFINITY,
        converged: true,
    };
    if bnorm == 0.0 {
        return (x, stats);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sqr();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        let pp = p.norm_sqr();
        stats.min_rayleigh = stats.min_rayleigh.min(pap / pp);
        stats.iterations = it;
        if pap <= 0.0 {
            stats.converged = false;
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.norm_sqr();
        stats.residual = rr_new.sqrt() / bnorm;
        if stats.residual <= tol {
            // Replace the recursive residual by a true one before declaring success.
            let true_r = sub(b, &apply(&x));
            stats.residual = true_r.norm_sqr().sqrt() / bnorm;
            if stats.residual <= tol * 10.0 {
                return (x, stats);
            }
            r = true_r;
            rr = r.norm_sqr();
            p = r.clone();
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        let mut np = r.clone();
        np.axpy(beta, &p);
        p = np;
    }
    stats.converged = stats.residual <= tol * 10.0;
    (x, stats)
}

/// Restarted GMRES with modified Gram–Schmidt, zero initial guess.
pub(crate) fn gmres(
    apply: &dyn Fn(&Pair) -> Pair,
    b: &Pair,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> (Pair, KrylovStats) {
    let n = b.u.len();
    let mut x = Pair::zeros(n);
    let bnorm = b.norm_sqr().sqrt();
    let mut stats = KrylovStats {
        iterations: 0,
        residual: 0.0,
        min_rayleigh: f64::NAN,
        converged: true,
    };
    if bnorm == 0.0 {
        return (x, stats);
    }
    let m = restart.max(1);
    while stats.iterations < max_iter {
        let r = sub(b, &apply(&x));
        let beta = r.norm_sqr().sqrt();
        stats.residual = beta / bnorm;
        if stats.residual <= tol {
            return (x, stats);
        }
        let mut basis = vec![{
            let mut v = Pair::zeros(n);
            v.axpy(1.0 / beta, &r);
            v
        }];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            if stats.iterations >= max_iter {
                break;
            }
            stats.iterations += 1;
            let mut w = apply(&basis[j]);
            for (i, vi) in basis.iter().enumerate() {
                h[i][j] = w.dot(vi);
                w.axpy(-h[i][j], vi);
            }
            h[j + 1][j] = w.norm_sqr().sqrt();
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let den = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / den;
            sn[j] = h[j + 1][j] / den;
            h[j][j] = den;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            let lucky = den == 0.0 || w.norm_sqr() == 0.0;
            if (g[j + 1].abs() / bnorm) <= tol || lucky {
                break;
            }
            let mut next = Pair::zeros(n);
            next.axpy(1.0 / h_norm(&w), &w);
            basis.push(next);
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&basis) {
            x.axpy(*yi, vi);
        }
    }
    let r = sub(b, &apply(&x));
    stats.residual = r.norm_sqr().sqrt() / bnorm;
    stats.converged = stats.residual <= tol * 10.0;
    (x, stats)
}

fn h_norm(w: &Pair) -> f64 {
    w.norm_sqr().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::C64;

    fn diag_op(d: Vec<f64>) -> impl Fn(&Pair) -> Pair {
        move |x: &Pair| Pair {
            u: x.u.iter().zip(&d).map(|(c, s)| c * *s).collect(),
            v: x.v.iter().zip(&d).map(|(c, s)| c * (*s + 1.0)).collect(),
        }
    }

    fn rhs(n: usize) -> Pair {
        Pair {
            u: (0..n).map(|k| C64::new(k as f64 + 1.0, -(k as f64))).collect(),
            v: (0..n).map(|k| C64::new(1.0, 0.5 * k as f64)).collect(),
        }
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let d: Vec<f64> = (0..8).map(|k| 1.0 + k as f64).collect();
        let op = diag_op(d);
        let b = rhs(8);
        let (x, st) = cg(&op, &b, 1e-12, 100);
        assert!(st.converged);
        let mut r = op(&x);
        r.axpy(-1.0, &b);
        assert!(r.norm_sqr().sqrt() < 1e-10);
        assert!((st.min_rayleigh - 1.0).abs() < 8.0);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let op = |x: &Pair| {
            let mut y = Pair {
                u: x.u.iter().map(|c| c * 2.0).collect(),
                v: x.v.iter().map(|c| c * 3.0).collect(),
            };
            for k in 1..y.u.len() {
                y.u[k] += 0.5 * x.u[k - 1];
            }
            y
        };
        let b = rhs(6);
        let (x, st) = gmres(&op, &b, 1e-12, 200, 10);
        assert!(st.converged, "{st:?}");
        let mut r = op(&x);
        r.axpy(-1.0, &b);
        assert!(r.norm_sqr().sqrt() < 1e-10);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let op = diag_op(vec![1.0; 4]);
        let (x, st) = cg(&op, &Pair::zeros(4), 1e-12, 10);
        assert_eq!(st.iterations, 0);
        assert_eq!(x.norm_sqr(), 0.0);
    }
}
