//! Small dense linear algebra for frame-coordinate work: Gaussian
//! elimination with partial pivoting, affine solution sets (particular
//! solution plus nullspace basis), and determinants. Matrices here never
//! exceed a few dozen rows, so nothing clever is needed.

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Solve the square system a x = b in place. Returns None when a pivot
/// falls below `pivot_tol` times the row scale (singular to working
/// precision).
pub fn solve_square(a: &Mat, b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(b.len(), a.rows);
    let n = a.rows;
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale: f64 = m.data.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, m.get(r, col).abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_val <= pivot_tol * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot_row, c));
                m.set(pivot_row, c, tmp);
            }
            rhs.swap(col, pivot_row);
        }
        let p = m.get(col, col);
        for r in (col + 1)..n {
            let f = m.get(r, col) / p;
            if f != 0.0 {
                for c in col..n {
                    let v = m.get(r, c) - f * m.get(col, c);
                    m.set(r, c, v);
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..n {
            acc -= m.get(r, c) * x[c];
        }
        x[r] = acc / m.get(r, r);
    }
    Some(x)
}

/// Solution set of a (possibly rectangular, possibly underdetermined)
/// system a x = b.
#[derive(Debug, Clone)]
pub enum AffineSolution {
    /// No x satisfies the system to working precision.
    Inconsistent,
    /// x = particular + span(nullspace), nullspace columns orthonormal.
    Solutions {
        particular: Vec<f64>,
        nullspace: Vec<Vec<f64>>,
    },
}

/// Gauss-Jordan with partial pivoting; pivots below `tol` times the matrix
/// scale are treated as zero.
pub fn solve_affine(a: &Mat, b: &[f64], tol: f64) -> AffineSolution {
    assert_eq!(b.len(), a.rows);
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale: f64 = m
        .data
        .iter()
        .chain(rhs.iter())
        .fold(0.0f64, |s, &v| s.max(v.abs()))
        .max(1.0);
    let thresh = tol * scale;

    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let (pr, pv) = (row..rows)
            .map(|r| (r, m.get(r, col).abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pv <= thresh {
            continue;
        }
        if pr != row {
            for c in 0..cols {
                let tmp = m.get(row, c);
                m.set(row, c, m.get(pr, c));
                m.set(pr, c, tmp);
            }
            rhs.swap(row, pr);
        }
        let p = m.get(row, col);
        for c in 0..cols {
            let v = m.get(row, c) / p;
            m.set(row, c, v);
        }
        rhs[row] /= p;
        for r in 0..rows {
            if r != row {
                let f = m.get(r, col);
                if f != 0.0 {
                    for c in 0..cols {
                        let v = m.get(r, c) - f * m.get(row, c);
                        m.set(r, c, v);
                    }
                    rhs[r] -= f * rhs[row];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    // Rows reduced to zero must have zero right-hand side.
    for r in row..rows {
        if rhs[r].abs() > thresh {
            return AffineSolution::Inconsistent;
        }
    }
    let mut particular = vec![0.0; cols];
    for (r, &pc) in pivot_cols.iter().enumerate() {
        particular[pc] = rhs[r];
    }
    let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut nullspace = Vec::with_capacity(free_cols.len());
    for &fc in &free_cols {
        let mut v = vec![0.0; cols];
        v[fc] = 1.0;
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m.get(r, fc);
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= n;
        }
        nullspace.push(v);
    }
    // Orthonormalize the nullspace basis (they are independent already;
    // downstream quadratic work wants orthonormal columns).
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(nullspace.len());
    for mut v in nullspace {
        for _ in 0..2 {
            for u in &ortho {
                let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= c * y;
                }
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-14 {
            for x in &mut v {
                *x /= n;
            }
            ortho.push(v);
        }
    }
    AffineSolution::Solutions {
        particular,
        nullspace: ortho,
    }
}

/// Determinant by LU with partial pivoting (small matrices only).
pub fn determinant(a: &Mat) -> f64 {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let (pr, pv) = (col..n)
            .map(|r| (r, m.get(r, col).abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pv == 0.0 {
            return 0.0;
        }
        if pr != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pr, c));
                m.set(pr, c, tmp);
            }
            det = -det;
        }
        let p = m.get(col, col);
        det *= p;
        for r in (col + 1)..n {
            let f = m.get(r, col) / p;
            for c in col..n {
                let v = m.get(r, c) - f * m.get(col, c);
                m.set(r, c, v);
            }
        }
    }
    det
}
