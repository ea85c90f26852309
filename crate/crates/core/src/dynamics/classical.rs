//! Classical stochastic dynamics: Kolmogorov generators, stochastic
//! trajectories and their propagators.

use serde::{Deserialize, Serialize};

use super::{RateFunction, TimeGrid, DRIFT_ABORT};
use crate::error::{Error, Result};

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for RealMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<RealMatrix> for Vec<Vec<f64>> {
    fn from(m: RealMatrix) -> Self {
        m.data.chunks(m.cols).map(|r| r.to_vec()).collect()
    }
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|idx| f(idx / cols, idx % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged or empty real matrix".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch("vector length".into()));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    pub fn add_scaled(&self, other: &RealMatrix, s: f64) -> RealMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Gauss-Jordan with partial pivoting; `Err(IllConditioned)` on a
    /// vanishing pivot.
    pub fn inverse(&self) -> Result<RealMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = RealMatrix::identity(n);
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a.get(x, col).abs().total_cmp(&a.get(y, col).abs()))
                .expect("nonempty");
            let pv = a.get(piv, col);
            if pv.abs() < 1e-14 * scale {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            for j in 0..n {
                a.data[col * n + j] /= pv;
                inv.data[col * n + j] /= pv;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.data[r * n + j] -= f * a.data[col * n + j];
                    inv.data[r * n + j] -= f * inv.data[col * n + j];
                }
            }
        }
        Ok(inv)
    }

    /// Largest `|Σ_i M_ij − 1|` over columns.
    pub fn column_sum_deviation(&self) -> f64 {
        (0..self.cols)
            .map(|j| ((0..self.rows).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Columns are probability vectors within `tol`.
    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        self.min_entry() >= -tol && self.column_sum_deviation() <= tol
    }

    pub fn check_stochastic(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::NotStochastic("matrix is not square".into()));
        }
        if self.min_entry() < -1e-9 {
            return Err(Error::NotStochastic(format!("negative entry {}", self.min_entry())));
        }
        let dev = self.column_sum_deviation();
        if dev > 1e-9 {
            return Err(Error::NotStochastic(format!("column sum off by {dev:e}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovTerm {
    pub matrix: RealMatrix,
    #[serde(default)]
    pub rate: RateFunction,
}

/// `K(t) = Σ_j f_j(t) K_j`, acting on column probability vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovGenerator {
    pub dim: usize,
    pub terms: Vec<KolmogorovTerm>,
}

impl KolmogorovGenerator {
    pub fn new(dim: usize, terms: Vec<KolmogorovTerm>) -> Result<Self> {
        let g = Self { dim, terms };
        g.validate()?;
        Ok(g)
    }

    /// Constant generator.
    pub fn constant(k: RealMatrix) -> Result<Self> {
        Self::new(
            k.rows(),
            vec![KolmogorovTerm {
                matrix: k,
                rate: RateFunction::constant(1.0),
            }],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("generator dimension must be positive".into()));
        }
        for t in &self.terms {
            if (t.matrix.rows(), t.matrix.cols()) != (self.dim, self.dim) {
                return Err(Error::DimensionMismatch(format!("Kolmogorov term is not {0}x{0}", self.dim)));
            }
            t.rate.validate()?;
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> RealMatrix {
        self.terms
            .iter()
            .fold(RealMatrix::zeros(self.dim, self.dim), |acc, term| {
                acc.add_scaled(&term.matrix, term.rate.eval(t))
            })
    }

    /// Birth-death chain on `n` sites with constant rates.
    pub fn birth_death(n: usize, birth: f64, death: f64) -> Result<Self> {
        let mut k = RealMatrix::zeros(n, n);
        for i in 0..n {
            if i + 1 < n {
                k.set(i + 1, i, birth);
                k.set(i, i + 1, death);
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).filter(|&i| i != j).map(|i| k.get(i, j)).sum();
            k.set(j, j, -s);
        }
        Self::constant(k)
    }

    /// `K = [[−a, b], [a, −b]]`.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        Self::constant(RealMatrix::from_rows(&[vec![-a, b], vec![a, -b]])?)
    }
}

/// Off-diagonal entries nonnegative and columns summing to zero.
pub fn kolmogorov_check(k: &KolmogorovGenerator, t: f64) -> bool {
    let m = k.at(t);
    let n = m.rows();
    let scale = (0..n * n).map(|i| m.data[i].abs()).fold(1.0, f64::max);
    (0..n).all(|j| {
        let off_ok = (0..n).filter(|&i| i != j).all(|i| m.get(i, j) >= -1e-12 * scale);
        let sum: f64 = (0..n).map(|i| m.get(i, j)).sum();
        off_ok && sum.abs() <= 1e-10 * scale
    })
}

#[derive(Clone, Debug)]
pub struct StochasticTrajectory {
    grid: TimeGrid,
    maps: Vec<RealMatrix>,
    source: KolmogorovGenerator,
}

impl StochasticTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn maps(&self) -> &[RealMatrix] {
        &self.maps
    }

    pub fn map_at(&self, index: usize) -> &RealMatrix {
        &self.maps[index]
    }

    pub fn source(&self) -> &KolmogorovGenerator {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `T(t) T(s)⁻¹`.
    pub fn propagator(&self, s: usize, t: usize) -> Result<RealMatrix> {
        if s > t || t >= self.len() {
            return Err(Error::InvalidArgument(format!("propagator indices s = {s}, t = {t}")));
        }
        if s == t {
            return Ok(RealMatrix::identity(self.source.dim));
        }
        let inv = self.maps[s].inverse().map_err(|_| Error::Singular {
            time: self.grid.times()[s],
            condition: f64::INFINITY,
        })?;
        self.maps[t].matmul(&inv)
    }
}

/// `dT/dt = K(t) T` with `T(0) = I`, fixed-step RK4.
pub fn classical_integrate(k: &KolmogorovGenerator, grid: &TimeGrid) -> Result<StochasticTrajectory> {
    classical_integrate_with(k, grid, super::DEFAULT_MAX_SUBSTEP)
}

pub fn classical_integrate_with(
    k: &KolmogorovGenerator,
    grid: &TimeGrid,
    max_substep: f64,
) -> Result<StochasticTrajectory> {
    k.validate()?;
    if !(max_substep > 0.0) {
        return Err(Error::InvalidArgument("substep must be positive".into()));
    }
    let n = k.dim;
    let mut y = RealMatrix::identity(n);
    let mut maps = vec![y.clone()];
    for w in grid.times().windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let steps = ((t1 - t0) / max_substep - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            let (k0, km, k1) = (k.at(t), k.at(t + 0.5 * h), k.at(if s + 1 == steps { t1 } else { t + h }));
            let d1 = k0.matmul(&y)?;
            let d2 = km.matmul(&y.add_scaled(&d1, 0.5 * h))?;
            let d3 = km.matmul(&y.add_scaled(&d2, 0.5 * h))?;
            let d4 = k1.matmul(&y.add_scaled(&d3, h))?;
            let incr = d1.add_scaled(&d2, 2.0).add_scaled(&d3, 2.0).add_scaled(&d4, 1.0);
            y = y.add_scaled(&incr, h / 6.0);
        }
        let drift = y.column_sum_deviation();
        if drift > DRIFT_ABORT {
            return Err(Error::IntegrationDrift {
                time: t1,
                drift,
                substep: h,
            });
        }
        maps.push(y.clone());
    }
    Ok(StochasticTrajectory {
        grid: grid.clone(),
        maps,
        source: k.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_gives_identity() {
        let k = KolmogorovGenerator::constant(RealMatrix::zeros(3, 3)).unwrap();
        let traj = classical_integrate(&k, &TimeGrid::uniform(1.0, 0.5).unwrap()).unwrap();
        assert!(traj.maps().iter().all(|m| m.max_abs_diff(&RealMatrix::identity(3)) == 0.0));
    }

    #[test]
    fn two_state_closed_form() {
        let (a, b) = (0.7, 0.4);
        let k = KolmogorovGenerator::two_state(a, b).unwrap();
        let traj = classical_integrate(&k, &TimeGrid::uniform(2.0, 0.1).unwrap()).unwrap();
        for (i, &t) in traj.times().iter().enumerate() {
            let e = (-(a + b) * t).exp();
            let t00 = (b + a * e) / (a + b);
            let t10 = (a - a * e) / (a + b);
            let m = traj.map_at(i);
            assert!((m.get(0, 0) - t00).abs() < 1e-10);
            assert!((m.get(1, 0) - t10).abs() < 1e-10);
        }
        let long = classical_integrate(&k, &TimeGrid::uniform(40.0, 1.0).unwrap()).unwrap();
        let last = long.maps().last().unwrap();
        for j in 0..2 {
            assert!((last.get(0, j) - b / (a + b)).abs() < 1e-9);
            assert!((last.get(1, j) - a / (a + b)).abs() < 1e-9);
        }
    }

    #[test]
    fn kolmogorov_conditions() {
        let good = KolmogorovGenerator::birth_death(3, 1.0, 0.5).unwrap();
        assert!(kolmogorov_check(&good, 0.0));
        let traj = classical_integrate(&good, &TimeGrid::uniform(1.0, 0.1).unwrap()).unwrap();
        assert!(traj.maps().iter().all(|m| m.is_column_stochastic(1e-9)));
        let bad = KolmogorovGenerator::two_state(-0.3, 0.5).unwrap();
        assert!(!kolmogorov_check(&bad, 0.0));
        let leaky = KolmogorovGenerator::constant(RealMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.5, 0.0]]).unwrap())
            .unwrap();
        assert!(!kolmogorov_check(&leaky, 0.0));
    }

    #[test]
    fn classical_chapman_kolmogorov() {
        let k = KolmogorovGenerator::birth_death(3, 1.0, 0.5).unwrap();
        let traj = classical_integrate(&k, &TimeGrid::uniform(1.0, 0.1).unwrap()).unwrap();
        for s in 0..traj.len() {
            for u in s..traj.len() {
                for t in u..traj.len() {
                    let comp = traj.propagator(u, t).unwrap().matmul(&traj.propagator(s, u).unwrap()).unwrap();
                    assert!(comp.max_abs_diff(&traj.propagator(s, t).unwrap()) < 1e-7);
                }
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let m = RealMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0]]).unwrap();
        let p = m.matmul(&m.inverse().unwrap()).unwrap();
        assert!(p.max_abs_diff(&RealMatrix::identity(3)) < 1e-14);
        assert!(RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap().inverse().is_err());
    }

    #[test]
    fn stochastic_check_names_the_defect() {
        let m = RealMatrix::from_rows(&[vec![0.5, 0.2], vec![0.4, 0.8]]).unwrap();
        assert!(matches!(m.check_stochastic(), Err(Error::NotStochastic(_))));
        assert!(RealMatrix::identity(2).check_stochastic().is_ok());
    }
}
