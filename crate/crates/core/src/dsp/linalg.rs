use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::Matrix;

/// Eigen-decomposition of a symmetric matrix: Householder reduction to
/// tridiagonal form followed by the implicit QL algorithm. Returns the
/// eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert_eq!(a.rows, a.cols, "eigen-decomposition needs a square matrix");
    let n = a.rows;
    if n == 0 {
        return (Vec::new(), Matrix::zeros(0, 0));
    }
    let mut v = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e);
    (d, Matrix { rows: n, cols: n, data: v })
}

fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for x in &mut d[..i] {
                *x /= scale;
                h += *x * *x;
            }
            let f = d[i - 1];
            let g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let g: f64 = (0..=i).map(|k| v[at(k, i + 1)] * v[at(k, j)]).sum();
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..64 {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for x in &mut d[l + 2..n] {
                    *x -= h;
                }
                f += h;
                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Moore-Penrose pseudo-inverse together with its numerical rank.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: Matrix,
    pub rank: usize,
}

impl PseudoInverse {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.matrix.rows.min(self.matrix.cols)
    }
}

/// Pseudo-inverse through the eigen-decomposition of the smaller Gram
/// matrix; eigenvalues below `max(m, n) * eps * lambda_max` count as zero.
pub fn pseudo_inverse(a: &Matrix) -> PseudoInverse {
    let wide = a.rows <= a.cols;
    let at = a.transpose();
    let gram = if wide { a.matmul(&at) } else { at.matmul(a) }.expect("conforming shapes");
    let (values, vectors) = symmetric_eigen(&gram);
    let lambda_max = values.iter().cloned().fold(0.0, f64::max);
    let tol = a.rows.max(a.cols) as f64 * f64::EPSILON * lambda_max;
    let k = gram.rows;
    let mut scaled = vectors.clone();
    let mut rank = 0;
    for (j, &lambda) in values.iter().enumerate() {
        let inv = if lambda > tol {
            rank += 1;
            1.0 / lambda
        } else {
            0.0
        };
        for i in 0..k {
            scaled.data[i * k + j] *= inv;
        }
    }
    let gram_pinv = scaled.matmul(&vectors.transpose()).expect("square");
    let matrix = if wide { at.matmul(&gram_pinv) } else { gram_pinv.matmul(&at) }.expect("conforming shapes");
    PseudoInverse { matrix, rank }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|i| ((i * 37 + 11) % 17) as f64 / 8.0 - 1.0).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn eigen_reconstructs_symmetric_matrix() {
        let b = sample(6, 6);
        let s = b.matmul(&b.transpose()).unwrap();
        let (vals, vecs) = symmetric_eigen(&s);
        let mut d = Matrix::zeros(6, 6);
        for i in 0..6 {
            d.set(i, i, vals[i]);
        }
        let rebuilt = vecs.matmul(&d).unwrap().matmul(&vecs.transpose()).unwrap();
        assert!(max_abs_diff(&rebuilt, &s) < 1e-10);
    }

    #[test]
    fn penrose_conditions_hold() {
        for (r, c) in [(4, 9), (9, 4), (5, 5)] {
            let a = sample(r, c);
            let p = pseudo_inverse(&a).matrix;
            let apa = a.matmul(&p).unwrap().matmul(&a).unwrap();
            let pap = p.matmul(&a).unwrap().matmul(&p).unwrap();
            assert!(max_abs_diff(&apa, &a) < 1e-9, "{r}x{c}");
            assert!(max_abs_diff(&pap, &p) < 1e-9, "{r}x{c}");
        }
    }

    #[test]
    fn zero_row_is_detected_as_rank_deficient() {
        let mut a = sample(4, 8);
        for c in 0..8 {
            a.set(2, c, 0.0);
        }
        let p = pseudo_inverse(&a);
        assert_eq!(p.rank, 3);
        assert!(p.is_rank_deficient());
        let apa = a.matmul(&p.matrix).unwrap().matmul(&a).unwrap();
        assert!(max_abs_diff(&apa, &a) < 1e-9);
    }
}
