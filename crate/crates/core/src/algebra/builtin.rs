use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{AlgebraError, LieAlgebra};

/// Inertia choice for the truncated sine algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SineInertia {
    #[default]
    Identity,
    /// `I T_m = |m|^2 T_m`, so `I^{-1}` is the inverse Laplacian.
    Laplacian,
}

/// Parameters accepted by [`builtin_algebra`].
#[derive(Debug, Clone, Default)]
pub struct AlgebraParams {
    /// Odd truncation `N` for `sine_truncated`.
    pub truncation: Option<usize>,
    pub sine_inertia: SineInertia,
    /// Overrides the default (identity) inertia.
    pub inertia: Option<DMatrix<f64>>,
}

pub fn builtin_algebra(name: &str, params: &AlgebraParams) -> Result<LieAlgebra, AlgebraError> {
    let algebra = match name {
        "so3" => so3(),
        "heisenberg3" => heisenberg3(),
        "sine_truncated" => {
            let n = params.truncation.ok_or(AlgebraError::BadTruncation(0))?;
            sine_truncated(n, params.sine_inertia)?
        }
        other => return Err(AlgebraError::UnknownAlgebra(other.to_string())),
    };
    match &params.inertia {
        Some(inertia) => algebra.with_inertia(inertia.clone()),
        None => Ok(algebra),
    }
}

fn so3() -> LieAlgebra {
    let entries = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)];
    LieAlgebra::from_sparse("so3", 3, &entries, DMatrix::identity(3, 3))
        .expect("so(3) is a Lie algebra")
}

fn heisenberg3() -> LieAlgebra {
    LieAlgebra::from_sparse("heisenberg3", 3, &[(0, 1, 2, 1.0)], DMatrix::identity(3, 3))
        .expect("h3 is a Lie algebra")
}

/// Basis labels `(m1, m2)` of the truncated sine algebra, in basis order:
/// all nonzero pairs with `|m_i| <= (N - 1) / 2`, lexicographic.
pub fn sine_modes(truncation: usize) -> Vec<(i64, i64)> {
    let h = (truncation as i64 - 1) / 2;
    let mut modes = Vec::with_capacity(truncation * truncation - 1);
    for m1 in -h..=h {
        for m2 in -h..=h {
            if (m1, m2) != (0, 0) {
                modes.push((m1, m2));
            }
        }
    }
    modes
}

/// Truncated sine-bracket algebra on `N^2 - 1` modes:
/// `[T_m, T_n] = (N / 2 pi) sin((2 pi / N) (m1 n2 - m2 n1)) T_{(m + n) mod N}`.
pub fn sine_truncated(truncation: usize, inertia: SineInertia) -> Result<LieAlgebra, AlgebraError> {
    if truncation < 3 || truncation % 2 == 0 {
        return Err(AlgebraError::BadTruncation(truncation));
    }
    let big_n = truncation as i64;
    let h = (big_n - 1) / 2;
    let modes = sine_modes(truncation);
    let dim = modes.len();
    let index_of = |m: (i64, i64)| -> Option<usize> {
        if m == (0, 0) {
            return None;
        }
        let row = (m.0 + h) * (2 * h + 1) + (m.1 + h);
        // (0, 0) sits in the middle of the grid and is skipped
        let centre = h * (2 * h + 1) + h;
        let slot = if row > centre { row - 1 } else { row };
        Some(slot as usize)
    };
    let reduce = |x: i64| -> i64 { (x + h).rem_euclid(big_n) - h };

    let scale = big_n as f64 / (2.0 * PI);
    let mut constants = vec![0.0; dim * dim * dim];
    for (i, &m) in modes.iter().enumerate() {
        for (j, &n) in modes.iter().enumerate() {
            let cross = m.0 * n.1 - m.1 * n.0;
            // reduce the phase exactly in integers before taking the sine
            let phase = cross.rem_euclid(big_n);
            if phase == 0 {
                continue;
            }
            let Some(k) = index_of((reduce(m.0 + n.0), reduce(m.1 + n.1))) else {
                continue;
            };
            constants[(i * dim + j) * dim + k] = scale * (2.0 * PI * phase as f64 / big_n as f64).sin();
        }
    }
    // sin(2 pi (N - p) / N) and -sin(2 pi p / N) differ in the last bit;
    // force exact antisymmetry from the upper triangle
    for i in 0..dim {
        for j in 0..i {
            for k in 0..dim {
                constants[(i * dim + j) * dim + k] = -constants[(j * dim + i) * dim + k];
            }
        }
    }
    let diag = match inertia {
        SineInertia::Identity => DVector::from_element(dim, 1.0),
        SineInertia::Laplacian => {
            DVector::from_iterator(dim, modes.iter().map(|m| (m.0 * m.0 + m.1 * m.1) as f64))
        }
    };
    LieAlgebra::from_dense(
        format!("sine_truncated({truncation})"),
        dim,
        constants,
        DMatrix::from_diagonal(&diag),
    )
}
