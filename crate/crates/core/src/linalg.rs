//! Small dense linear algebra: row-major matrices, LU solves (real and
//! complex), and a real nonsymmetric eigensolver (balancing + Householder
//! Hessenberg reduction + Francis double-shift QR). Sized for the state
//! dimensions of this crate (n <= ~20); no blocking, no allocation tricks.

use crate::error::{Error, Result};
use crate::{Complex, Real};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.cols {
                    acc += self[(i, j)] * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve `A x = b` by LU with partial pivoting. `A` is consumed as scratch.
pub fn lu_solve<T: Real>(mut a: Mat<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    let mut x: Vec<T> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut piv = k;
        let mut best = a[(perm[k], k)].abs();
        for i in (k + 1)..n {
            let v = a[(perm[i], k)].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if !(best > T::zero()) || !best.is_finite() {
            return Err(Error::SingularMatrix(format!("LU pivot {k} of {n}")));
        }
        perm.swap(k, piv);
        let pk = perm[k];
        for i in (k + 1)..n {
            let pi = perm[i];
            let l = a[(pi, k)] / a[(pk, k)];
            a[(pi, k)] = l;
            for j in (k + 1)..n {
                let upd = a[(pk, j)];
                a[(pi, j)] = a[(pi, j)] - l * upd;
            }
        }
    }

    // Forward substitution on the permuted right-hand side.
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut acc = x[perm[i]];
        for j in 0..i {
            acc -= a[(perm[i], j)] * y[j];
        }
        y[i] = acc;
    }
    // Back substitution.
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= a[(perm[i], j)] * x[j];
        }
        x[i] = acc / a[(perm[i], i)];
    }
    Ok(x)
}

/// Complex dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve the complex system `A X = B` for all columns of `B` at once.
pub fn clu_solve<T: Real>(mut a: CMat<T>, b: &CMat<T>) -> Result<CMat<T>> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.rows, n);
    let mut x = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut piv = k;
        let mut best = a[(perm[k], k)].norm_sqr();
        for i in (k + 1)..n {
            let v = a[(perm[i], k)].norm_sqr();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if !(best > T::zero()) || !best.is_finite() {
            return Err(Error::SingularMatrix(format!("complex LU pivot {k} of {n}")));
        }
        perm.swap(k, piv);
        let pk = perm[k];
        for i in (k + 1)..n {
            let pi = perm[i];
            let l = a[(pi, k)] / a[(pk, k)];
            a[(pi, k)] = l;
            for j in (k + 1)..n {
                let upd = a[(pk, j)];
                a[(pi, j)] = a[(pi, j)] - l * upd;
            }
        }
    }

    let ncols = b.cols;
    let mut y = CMat::zeros(n, ncols);
    for c in 0..ncols {
        for i in 0..n {
            let mut acc = x[(perm[i], c)];
            for j in 0..i {
                let l = a[(perm[i], j)];
                let yj = y[(j, c)];
                acc -= l * yj;
            }
            y[(i, c)] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[(i, c)];
            for j in (i + 1)..n {
                let u = a[(perm[i], j)];
                let xj = x[(j, c)];
                acc -= u * xj;
            }
            x[(i, c)] = acc / a[(perm[i], i)];
        }
    }
    Ok(x)
}

/// Eigenvalues of a real square matrix.
///
/// Balances the matrix (Parlett-Reinsch, radix 2), reduces to upper
/// Hessenberg form with Householder reflectors, then runs the Francis
/// double-shift QR iteration. Complex pairs come out exactly
/// conjugate-closed because each 2x2 block is resolved analytically.
pub fn eigenvalues<T: Real>(a: &Mat<T>) -> Result<Vec<Complex<T>>> {
    let n = a.rows;
    assert_eq!(a.cols, n, "eigenvalues need a square matrix");
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input matrix".into()));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    francis_qr(h)
}

/// Parlett-Reinsch balancing: similarity scaling by powers of 2 to bring row
/// and column norms close; exact in floating point.
fn balance<T: Real>(a: &mut Mat<T>) {
    let n = a.rows;
    let radix = T::of(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c > T::zero() && r > T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                let mut c_acc = c;
                while c_acc < g {
                    f *= radix;
                    c_acc *= sqrdx;
                }
                g = r * radix;
                while c_acc > g {
                    f /= radix;
                    c_acc /= sqrdx;
                }
                if (c_acc + r) / f < T::of(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] = a[(i, j)] * g;
                    }
                    for j in 0..n {
                        a[(j, i)] = a[(j, i)] * f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place; the lower
/// triangle below the subdiagonal is left as scratch and ignored afterward).
fn hessenberg<T: Real>(a: &mut Mat<T>) {
    let n = a.rows;
    if n < 3 {
        return;
    }
    let mut v = vec![T::zero(); n];
    for k in 0..n - 2 {
        // Build the reflector for column k below the subdiagonal.
        let mut alpha = T::zero();
        for i in (k + 1)..n {
            alpha = alpha.max(a[(i, k)].abs());
        }
        if alpha == T::zero() {
            continue;
        }
        let mut sigma = T::zero();
        for i in (k + 1)..n {
            v[i] = a[(i, k)] / alpha;
            sigma += v[i] * v[i];
        }
        let mut norm = sigma.sqrt();
        if v[k + 1] < T::zero() {
            norm = -norm;
        }
        v[k + 1] += norm;
        let beta = T::one() / (norm * v[k + 1]);

        // Apply I - beta v v^T from the left: A <- A - beta v (v^T A).
        for j in k..n {
            let mut s = T::zero();
            for i in (k + 1)..n {
                s += v[i] * a[(i, j)];
            }
            s *= beta;
            for i in (k + 1)..n {
                a[(i, j)] = a[(i, j)] - s * v[i];
            }
        }
        // Apply from the right: A <- A - beta (A v) v^T.
        for i in 0..n {
            let mut s = T::zero();
            for j in (k + 1)..n {
                s += a[(i, j)] * v[j];
            }
            s *= beta;
            for j in (k + 1)..n {
                a[(i, j)] = a[(i, j)] - s * v[j];
            }
        }
        a[(k + 1, k)] = -norm * alpha;
        for i in (k + 2)..n {
            a[(i, k)] = T::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns all
/// eigenvalues. Follows the classical EISPACK `hqr` organization.
fn francis_qr<T: Real>(mut h: Mat<T>) -> Result<Vec<Complex<T>>> {
    let n = h.rows;
    let mut eigs: Vec<Complex<T>> = Vec::with_capacity(n);
    if n == 0 {
        return Ok(eigs);
    }
    let eps = T::epsilon();
    let mut hi = n - 1; // active block is rows/cols 0..=hi
    let mut iter_this_block = 0usize;
    let max_iter_per_eig = 60usize;

    // Overall scale for the small-subdiagonal test.
    let anorm = {
        let mut s = T::zero();
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                s += h[(i, j)].abs();
            }
        }
        if s > T::zero() {
            s
        } else {
            T::one()
        }
    };

    loop {
        // Find the start of the trailing irreducible block.
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].abs() + h[(lo, lo)].abs();
            let s = if s == T::zero() { anorm } else { s };
            if h[(lo, lo - 1)].abs() <= eps * s {
                h[(lo, lo - 1)] = T::zero();
                break;
            }
            lo -= 1;
        }

        if lo == hi {
            // 1x1 block: real eigenvalue.
            eigs.push(Complex::new(h[(hi, hi)], T::zero()));
            if hi == 0 {
                break;
            }
            hi -= 1;
            iter_this_block = 0;
            continue;
        }
        if lo + 1 == hi {
            // 2x2 block: resolve analytically.
            let p = (h[(lo, lo)] - h[(hi, hi)]) * T::of(0.5);
            let det_off = h[(hi, lo)] * h[(lo, hi)];
            let disc = p * p + det_off;
            let mean = (h[(lo, lo)] + h[(hi, hi)]) * T::of(0.5);
            if disc >= T::zero() {
                let root = disc.sqrt();
                // Stable split: larger-magnitude root first.
                let r1 = if mean >= T::zero() { mean + root } else { mean - root };
                let r2 = if r1 == T::zero() { mean } else { (mean * mean - disc) / r1 };
                eigs.push(Complex::new(r1, T::zero()));
                eigs.push(Complex::new(r2, T::zero()));
            } else {
                let im = (-disc).sqrt();
                eigs.push(Complex::new(mean, im));
                eigs.push(Complex::new(mean, -im));
            }
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            iter_this_block = 0;
            continue;
        }

        if iter_this_block >= max_iter_per_eig {
            return Err(Error::EigenNoConvergence(hi));
        }

        // Shift selection: Francis double shift from the trailing 2x2 as the
        // sum `s` and product `t` of the two shifts, with an exceptional
        // shift at iterations 10 and 20 to break limit cycles.
        let (s, t);
        if iter_this_block > 0 && iter_this_block % 10 == 0 {
            let d = h[(hi, hi)];
            let w = h[(hi, hi - 1)].abs() + h[(hi - 1, hi - 2)].abs();
            // Shifts d + lambda with lambda solving l^2 - 1.5 w l + w^2 = 0.
            s = T::of(2.0) * d + T::of(1.5) * w;
            t = d * d + T::of(1.5) * w * d + w * w;
        } else {
            s = h[(hi - 1, hi - 1)] + h[(hi, hi)];
            t = h[(hi - 1, hi - 1)] * h[(hi, hi)] - h[(hi, hi - 1)] * h[(hi - 1, hi)];
        }
        iter_this_block += 1;

        // First column of (H - s1)(H - s2) restricted to the active block.
        let mut m = hi - 2;
        let (mut p, mut q, mut r);
        loop {
            let hmm = h[(m, m)];
            p = hmm * hmm + h[(m, m + 1)] * h[(m + 1, m)] - s * hmm + t;
            q = h[(m + 1, m)] * (hmm + h[(m + 1, m + 1)] - s);
            r = h[(m + 1, m)] * h[(m + 2, m + 1)];
            if m == lo {
                break;
            }
            // Deflation lookahead (Wilkinson's criterion).
            let scale = p.abs() + q.abs() + r.abs();
            if scale == T::zero() {
                break;
            }
            let lhs = h[(m, m - 1)].abs() * (q.abs() + r.abs());
            let rhs = p.abs()
                * (h[(m - 1, m - 1)].abs() + h[(m, m)].abs() + h[(m + 1, m + 1)].abs());
            if lhs <= eps * rhs {
                break;
            }
            m -= 1;
        }

        // Chase the bulge from m to hi.
        for i in (m + 2)..=hi {
            h[(i, i - 2)] = T::zero();
            if i > m + 2 {
                h[(i, i - 3)] = T::zero();
            }
        }
        let mut k = m;
        while k <= hi - 1 {
            if k != m {
                p = h[(k, k - 1)];
                q = h[(k + 1, k - 1)];
                r = if k + 2 <= hi { h[(k + 2, k - 1)] } else { T::zero() };
            }
            let x = p.abs() + q.abs() + r.abs();
            if x == T::zero() {
                k += 1;
                continue;
            }
            let (pp, qq, rr) = (p / x, q / x, r / x);
            let mut sgn = (pp * pp + qq * qq + rr * rr).sqrt();
            if pp < T::zero() {
                sgn = -sgn;
            }
            if k != m {
                h[(k, k - 1)] = -sgn * x;
            } else if lo != m {
                h[(k, k - 1)] = -h[(k, k - 1)];
            }
            let p1 = pp + sgn;
            let (xf, yf, zf) = (p1 / sgn, qq / sgn, rr / sgn);
            let (q1, r1) = (qq / p1, rr / p1);

            // Row modification.
            let jmax = n - 1;
            for j in k..=jmax {
                let mut pj = h[(k, j)] + q1 * h[(k + 1, j)];
                if k + 2 <= hi {
                    pj += r1 * h[(k + 2, j)];
                    h[(k + 2, j)] = h[(k + 2, j)] - pj * zf;
                }
                h[(k + 1, j)] = h[(k + 1, j)] - pj * yf;
                h[(k, j)] = h[(k, j)] - pj * xf;
            }
            // Column modification.
            let imax = hi.min(k + 3);
            for i in 0..=imax {
                let mut pi = xf * h[(i, k)] + yf * h[(i, k + 1)];
                if k + 2 <= hi {
                    pi += zf * h[(i, k + 2)];
                    h[(i, k + 2)] = h[(i, k + 2)] - pi * r1;
                }
                h[(i, k + 1)] = h[(i, k + 1)] - pi * q1;
                h[(i, k)] = h[(i, k)] - pi;
            }
            k += 1;
        }
    }

    debug_assert_eq!(eigs.len(), n);
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn lu_solves_known_system() {
        let a = Mat::from_rows(&[&[4.0, 7.0], &[2.0, 6.0]]);
        let x = lu_solve(a, &[1.0, -2.0]).unwrap();
        // Inverse of [[4,7],[2,6]] is [[0.6,-0.7],[-0.2,0.4]].
        assert!(approx(x[0], 0.6 * 1.0 + -0.7 * -2.0, 1e-14));
        assert!(approx(x[1], -0.2 * 1.0 + 0.4 * -2.0, 1e-14));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(lu_solve(a, &[1.0, 1.0]), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn clu_solves_complex_system() {
        let mut a = CMat::<f64>::zeros(2, 2);
        a[(0, 0)] = Complex::new(1.0, 1.0);
        a[(0, 1)] = Complex::new(2.0, 0.0);
        a[(1, 0)] = Complex::new(0.0, -1.0);
        a[(1, 1)] = Complex::new(3.0, 2.0);
        let mut b = CMat::<f64>::zeros(2, 1);
        b[(0, 0)] = Complex::new(1.0, 0.0);
        b[(1, 0)] = Complex::new(0.0, 1.0);
        let x = clu_solve(a.clone(), &b).unwrap();
        // Residual check.
        for i in 0..2 {
            let mut acc = Complex::new(0.0, 0.0);
            for j in 0..2 {
                acc += a[(i, j)] * x[(j, 0)];
            }
            assert!((acc - b[(i, 0)]).norm() < 1e-14);
        }
    }

    #[test]
    fn eigen_diagonal() {
        let a = Mat::from_rows(&[&[3.0, 0.0, 0.0], &[0.0, -1.5, 0.0], &[0.0, 0.0, 0.25]]);
        let mut eigs: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|e| e.re).collect();
        eigs.sort_by(f64::total_cmp);
        assert!(approx(eigs[0], -1.5, 1e-12));
        assert!(approx(eigs[1], 0.25, 1e-12));
        assert!(approx(eigs[2], 3.0, 1e-12));
    }

    #[test]
    fn eigen_undamped_oscillator() {
        let omega = 377.0;
        let a = Mat::from_rows(&[&[0.0, 1.0], &[-omega * omega, 0.0]]);
        let eigs = eigenvalues(&a).unwrap();
        let mut ims: Vec<f64> = eigs.iter().map(|e| e.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!(approx(ims[0], -omega, 1e-10));
        assert!(approx(ims[1], omega, 1e-10));
        assert!(eigs.iter().all(|e| e.re.abs() < 1e-8 * omega));
    }

    #[test]
    fn eigen_recovers_constructed_spectrum() {
        // Build A = Q L Q^{-1} from a chosen spectrum and a well-conditioned
        // random Q; the solver must recover L within 1e-7 relative.
        let lambda = [-3.0, -1.0, -0.1, 2.0, 40.0, -25.0];
        let n = lambda.len();
        let mut state = 0xdeadbeefcafeu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        // Q = I + 0.3 R keeps conditioning mild.
        let mut q = Mat::<f64>::identity(n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] += 0.3 * next();
            }
        }
        let mut l = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            l[(i, i)] = lambda[i];
        }
        // A = Q L Q^{-1}: solve Q X = (Q L)^T-ish via LU per column.
        let ql = q.matmul(&l);
        // X solves X Q = QL  =>  Q^T X^T = (QL)^T.
        let mut qt = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                qt[(i, j)] = q[(j, i)];
            }
        }
        let mut a = Mat::<f64>::zeros(n, n);
        for row in 0..n {
            let rhs: Vec<f64> = (0..n).map(|j| ql[(row, j)]).collect();
            let sol = lu_solve(qt.clone(), &rhs).unwrap();
            for j in 0..n {
                a[(row, j)] = sol[j];
            }
        }
        let mut eigs: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|e| e.re).collect();
        assert!(eigenvalues(&a).unwrap().iter().all(|e| e.im.abs() < 1e-7));
        eigs.sort_by(f64::total_cmp);
        let mut expect = lambda.to_vec();
        expect.sort_by(f64::total_cmp);
        for (got, want) in eigs.iter().zip(&expect) {
            assert!(
                (got - want).abs() / want.abs().max(1.0) < 1e-7,
                "got {got}, want {want}"
            );
        }
    }

    #[test]
    fn eigen_conjugate_closure() {
        // Random matrices: every complex eigenvalue has its conjugate within
        // 1e-9 relative.
        let mut state = 0x123456789abcdefu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        };
        for n in [2usize, 5, 9, 13] {
            let mut a = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = next();
                }
            }
            let eigs = eigenvalues(&a).unwrap();
            assert_eq!(eigs.len(), n);
            let scale = eigs.iter().fold(1.0f64, |m, e| m.max(e.norm()));
            for e in &eigs {
                if e.im != 0.0 {
                    let conj_found = eigs
                        .iter()
                        .any(|f| (f.re - e.re).abs() + (f.im + e.im).abs() < 1e-9 * scale);
                    assert!(conj_found, "missing conjugate of {e}");
                }
            }
        }
    }

    #[test]
    fn eigen_badly_scaled_matrix() {
        // Balancing handles entries spread over many orders of magnitude.
        let a = Mat::from_rows(&[
            &[0.0, 1e6, 0.0],
            &[-1e-6, -2.0, 1e4],
            &[0.0, 1e-8, -50.0],
        ]);
        let eigs = eigenvalues(&a).unwrap();
        // Characteristic polynomial has roots near -1 (double, from the
        // first 2x2) and -50 with small couplings; just demand finiteness
        // and conjugate closure plus trace consistency.
        let trace: f64 = eigs.iter().map(|e| e.re).sum();
        assert!((trace - (-52.0)).abs() < 1e-6 * 52.0);
    }

    #[test]
    fn eigen_rejects_nonfinite() {
        let a = Mat::from_rows(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(matches!(eigenvalues(&a), Err(Error::NonFinite(_))));
    }
}
