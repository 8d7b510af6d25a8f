//! Lipschitz central interpolation over scattered design points.
//!
//! For data `f(x_l)` and constant `L`, the tightest envelopes are
//! `H_low(x) = max_l f(x_l) - L d(x, x_l)` and `H_up(x) = min_l f(x_l) + L d(x, x_l)`;
//! the interpolant is their midpoint. Its sup error over the space is at most
//! `L` times the covering radius of the design.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::StateSpace;
use crate::rng::Stream;

/// State metric: discrete 0/1 on tabular indices, Euclidean on coordinates.
pub trait Metric {
    fn distance(&self, other: &Self) -> f64;
}

impl Metric for usize {
    #[inline]
    fn distance(&self, other: &Self) -> f64 {
        if self == other {
            0.0
        } else {
            1.0
        }
    }
}

impl Metric for Vec<f64> {
    #[inline]
    fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// States that can be written as a row of coordinates.
pub trait Coordinates: Sized {
    fn coords(&self) -> Vec<f64>;
    fn from_coords(c: &[f64]) -> Option<Self>;
}

impl Coordinates for usize {
    fn coords(&self) -> Vec<f64> {
        vec![*self as f64]
    }

    fn from_coords(c: &[f64]) -> Option<Self> {
        match c {
            [v] if *v >= 0.0 && v.fract() == 0.0 => Some(*v as usize),
            _ => None,
        }
    }
}

impl Coordinates for Vec<f64> {
    fn coords(&self) -> Vec<f64> {
        self.clone()
    }

    fn from_coords(c: &[f64]) -> Option<Self> {
        Some(c.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet<S> {
    pub points: Vec<S>,
}

impl<S: Metric> DesignSet<S> {
    pub fn new(points: Vec<S>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("design set must be nonempty".into()));
        }
        Ok(DesignSet { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `x` to its nearest design point.
    pub fn nearest_distance(&self, x: &S) -> f64 {
        self.points.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min)
    }
}

/// Smallest `L` consistent with the data: the largest pairwise slope.
pub fn estimate_lipschitz<S: Metric>(design: &DesignSet<S>, values: &[f64]) -> Result<f64> {
    check_len(design, values)?;
    let pts = &design.points;
    let mut lip = 0.0_f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = pts[i].distance(&pts[j]);
            let dv = (values[i] - values[j]).abs();
            if d == 0.0 {
                if dv != 0.0 {
                    return Err(Error::DuplicatePoints { i, j });
                }
                continue;
            }
            lip = lip.max(dv / d);
        }
    }
    Ok(lip)
}

fn check_len<S>(design: &DesignSet<S>, values: &[f64]) -> Result<()> {
    if design.points.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: design.points.len(), got: values.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipMode {
    Estimated,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant<S> {
    design: DesignSet<S>,
    values: Vec<f64>,
    lip: f64,
}

impl<S: Metric> Interpolant<S> {
    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn design(&self) -> &DesignSet<S> {
        &self.design
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(H_low(x), H_up(x))`, or `Err(i)` when `x` coincides with design point `i`.
    fn scan(&self, x: &S) -> std::result::Result<(f64, f64), usize> {
        let mut low = f64::NEG_INFINITY;
        let mut up = f64::INFINITY;
        for (i, (p, &v)) in self.design.points.iter().zip(&self.values).enumerate() {
            let d = p.distance(x);
            if d == 0.0 {
                return Err(i);
            }
            let ld = self.lip * d;
            low = low.max(v - ld);
            up = up.min(v + ld);
        }
        Ok((low, up))
    }

    pub fn envelopes(&self, x: &S) -> (f64, f64) {
        match self.scan(x) {
            Ok(e) => e,
            Err(i) => (self.values[i], self.values[i]),
        }
    }

    /// Central interpolant value; exact at design points.
    #[inline]
    pub fn value(&self, x: &S) -> f64 {
        match self.scan(x) {
            Ok((low, up)) => 0.5 * (low + up),
            Err(i) => self.values[i],
        }
    }

    /// Like [`value`](Self::value) but reports crossed envelopes.
    pub fn try_value(&self, x: &S) -> Result<f64> {
        match self.scan(x) {
            Ok((low, up)) if low > up + crossing_tol(low, up) => Err(Error::EnvelopeCrossing {
                index: usize::MAX,
                lower: low,
                upper: up,
                lip: self.lip,
            }),
            Ok((low, up)) => Ok(0.5 * (low + up)),
            Err(i) => Ok(self.values[i]),
        }
    }
}

fn crossing_tol(a: f64, b: f64) -> f64 {
    1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Builds and validates the central interpolant of `values` over `design`.
pub fn build_interpolant<S: Metric>(design: DesignSet<S>, values: Vec<f64>, mode: LipMode) -> Result<Interpolant<S>> {
    check_len(&design, &values)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("non-finite value at design point {i}")));
    }
    let lip = match mode {
        LipMode::Estimated => estimate_lipschitz(&design, &values)?,
        LipMode::Fixed(l) if l >= 0.0 && l.is_finite() => l,
        LipMode::Fixed(l) => return Err(Error::InvalidSpec(format!("Lipschitz constant {l} must be finite and >= 0"))),
    };
    if let LipMode::Fixed(_) = mode {
        // the envelopes cross at x_i iff some f_j - L d_ij exceeds f_i
        let pts = &design.points;
        for i in 0..pts.len() {
            let mut low = f64::NEG_INFINITY;
            for j in 0..pts.len() {
                low = low.max(values[j] - lip * pts[i].distance(&pts[j]));
            }
            if low > values[i] + crossing_tol(low, values[i]) {
                return Err(Error::EnvelopeCrossing { index: i, lower: low, upper: values[i], lip });
            }
        }
    }
    Ok(Interpolant { design, values, lip })
}

impl<S: Metric + Coordinates> Interpolant<S> {
    /// CSV with a `# lip=<L>` header line, then one row per design point.
    pub fn to_csv(&self) -> String {
        let dim = self.design.points.first().map_or(0, |p| p.coords().len());
        let mut s = format!("# lip={}\n", self.lip);
        for k in 0..dim {
            write!(s, "x{k},").unwrap();
        }
        s.push_str("value\n");
        for (p, v) in self.design.points.iter().zip(&self.values) {
            for c in p.coords() {
                write!(s, "{c},").unwrap();
            }
            writeln!(s, "{v}").unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let lip: f64 = first
            .strip_prefix("# lip=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or(Error::Parse { line: 1, msg: "expected `# lip=<L>` header".into() })?;
        lines.next();
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            let (v, c) = nums.split_last().ok_or(Error::Parse { line: i + 1, msg: "empty row".into() })?;
            points.push(S::from_coords(c).ok_or(Error::Parse { line: i + 1, msg: "bad coordinates".into() })?);
            values.push(*v);
        }
        build_interpolant(DesignSet::new(points)?, values, LipMode::Fixed(lip))
    }
}

/// Max over `probe` of the distance to the nearest design point.
pub fn covering_radius<S: Metric>(design: &DesignSet<S>, probe: &[S]) -> f64 {
    probe.iter().map(|x| design.nearest_distance(x)).fold(0.0, f64::max)
}

/// Bucket grid over the bounding box of a point set, for nearest-neighbour
/// queries in low dimension.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a [Vec<f64>],
    lower: Vec<f64>,
    width: Vec<f64>,
    cells: Vec<usize>,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a [Vec<f64>]) -> Result<Self> {
        let dim = points.first().ok_or(Error::InvalidSpec("empty point set".into()))?.len();
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            for k in 0..dim {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        // about one point per cell
        let per_axis = ((points.len() as f64).powf(1.0 / dim as f64).floor() as usize).max(1);
        let cells = vec![per_axis; dim];
        let width: Vec<f64> = (0..dim).map(|k| ((upper[k] - lower[k]) / per_axis as f64).max(f64::MIN_POSITIVE)).collect();
        let mut index = GridIndex { points, lower, width, cells, offsets: Vec::new(), members: Vec::new() };
        let total: usize = index.cells.iter().product();
        let ids: Vec<usize> = points.iter().map(|p| index.flat(&index.cell_of(p))).collect();
        let mut counts = vec![0usize; total + 1];
        for &c in &ids {
            counts[c + 1] += 1;
        }
        for c in 0..total {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut members = vec![0; points.len()];
        for (i, &c) in ids.iter().enumerate() {
            members[fill[c]] = i;
            fill[c] += 1;
        }
        index.offsets = counts;
        index.members = members;
        Ok(index)
    }

    fn cell_of(&self, x: &[f64]) -> Vec<isize> {
        (0..self.cells.len())
            .map(|k| (((x[k] - self.lower[k]) / self.width[k]).floor() as isize).clamp(0, self.cells[k] as isize - 1))
            .collect()
    }

    fn flat(&self, c: &[isize]) -> usize {
        c.iter().zip(&self.cells).rev().fold(0, |acc, (&i, &n)| acc * n + i as usize)
    }

    /// Distance from `x` to the nearest indexed point.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        let dim = self.cells.len();
        let home = self.cell_of(x);
        let min_width = self.width.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ring = self.cells.iter().copied().max().unwrap_or(1) as isize;
        let mut best = f64::INFINITY;
        let mut offset = vec![0isize; dim];
        let mut cell = vec![0isize; dim];
        for r in 0..=max_ring {
            // every cell in the cube of half-width r whose Chebyshev offset is exactly r
            let side = 2 * r + 1;
            let total = (side as usize).pow(dim as u32);
            for mut t in 0..total {
                let mut on_shell = false;
                for k in 0..dim {
                    offset[k] = (t % side as usize) as isize - r;
                    t /= side as usize;
                    on_shell |= offset[k].abs() == r;
                }
                if !on_shell {
                    continue;
                }
                let mut inside = true;
                for k in 0..dim {
                    cell[k] = home[k] + offset[k];
                    inside &= cell[k] >= 0 && cell[k] < self.cells[k] as isize;
                }
                if !inside {
                    continue;
                }
                let c = self.flat(&cell);
                for &i in &self.members[self.offsets[c]..self.offsets[c + 1]] {
                    let d2: f64 = self.points[i].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    best = best.min(d2);
                }
            }
            // points in later rings are at least r cell widths away
            if best.is_finite() && best.sqrt() <= r as f64 * min_width {
                break;
            }
        }
        best.sqrt()
    }
}

/// [`covering_radius`] through a [`GridIndex`]; same result, much faster
/// for large designs in low dimension.
pub fn covering_radius_indexed(design: &DesignSet<Vec<f64>>, probe: &[Vec<f64>]) -> Result<f64> {
    use rayon::prelude::*;
    let index = GridIndex::new(&design.points)?;
    Ok(probe.par_iter().map(|x| index.nearest_distance(x)).reduce(|| 0.0, f64::max))
}

/// Probe size used when estimating a box covering radius.
pub fn default_probe_size(n_design: usize) -> usize {
    (100 * n_design).max(10_000)
}

fn box_bounds(space: &StateSpace) -> Result<(&[f64], &[f64])> {
    match space {
        StateSpace::Box { lower, upper } => Ok((lower, upper)),
        StateSpace::Tabular { .. } => Err(Error::NotBox),
    }
}

/// One uniform point in a box.
pub fn uniform_point(lower: &[f64], upper: &[f64], rng: &mut Stream) -> Vec<f64> {
    lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.gen::<f64>()).collect()
}

/// `n` i.i.d. uniform points in a box space.
pub fn sample_design_uniform(n: usize, space: &StateSpace, rng: &mut Stream) -> Result<DesignSet<Vec<f64>>> {
    let (lower, upper) = box_bounds(space)?;
    if n == 0 {
        return Err(Error::InvalidSpec("design size must be >= 1".into()));
    }
    DesignSet::new((0..n).map(|_| uniform_point(lower, upper, rng)).collect())
}

pub fn uniform_probe(space: &StateSpace, n: usize, rng: &mut Stream) -> Result<Vec<Vec<f64>>> {
    let (lower, upper) = box_bounds(space)?;
    Ok((0..n).map(|_| uniform_point(lower, upper, rng)).collect())
}

/// Full product grid with `per_axis` points per coordinate, endpoints included.
pub fn grid_probe(space: &StateSpace, per_axis: usize) -> Result<Vec<Vec<f64>>> {
    let (lower, upper) = box_bounds(space)?;
    let per_axis = per_axis.max(2);
    let dim = lower.len();
    let total = per_axis.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = Vec::with_capacity(dim);
        for k in 0..dim {
            let i = idx % per_axis;
            idx /= per_axis;
            p.push(lower[k] + (upper[k] - lower[k]) * i as f64 / (per_axis - 1) as f64);
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn line(points: &[f64]) -> DesignSet<Vec<f64>> {
        DesignSet::new(points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    fn unit(d: usize) -> StateSpace {
        StateSpace::new_box(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn two_point_slope() {
        assert_eq!(estimate_lipschitz(&line(&[0.0, 1.0]), &[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(estimate_lipschitz(&line(&[0.0, 0.3, 1.0]), &[4.0, 4.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_points_with_different_values_rejected() {
        let d = line(&[0.2, 0.2]);
        assert!(matches!(estimate_lipschitz(&d, &[1.0, 2.0]), Err(Error::DuplicatePoints { i: 0, j: 1 })));
        assert_eq!(estimate_lipschitz(&d, &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn abs_kink_slope_approaches_one() {
        // brute force pairwise slopes of |x - 0.5| on refining grids
        let mut prev = 0.0;
        for n in [3usize, 6, 11, 101] {
            let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let vals: Vec<f64> = pts.iter().map(|x| (x - 0.5).abs()).collect();
            let l = estimate_lipschitz(&line(&pts), &vals).unwrap();
            assert!(l <= 1.0 + 1e-12);
            assert!(l >= prev - 1e-12);
            prev = l;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn central_interpolant_of_abs_kink() {
        let i = build_interpolant(line(&[0.0, 0.5, 1.0]), vec![0.5, 0.0, 0.5], LipMode::Fixed(1.0)).unwrap();
        assert_eq!(i.envelopes(&vec![0.25]), (0.25, 0.25));
        assert_eq!(i.value(&vec![0.25]), 0.25);
        assert_eq!(i.value(&vec![0.5]), 0.0);
        assert_eq!(i.value(&vec![1.0]), 0.5);
    }

    #[test]
    fn fixed_zero_lip_on_varying_data_fails() {
        let r = build_interpolant(line(&[0.0, 1.0]), vec![0.0, 1.0], LipMode::Fixed(0.0));
        assert!(matches!(r, Err(Error::EnvelopeCrossing { .. })));
        assert!(build_interpolant(line(&[0.0, 1.0]), vec![0.0, 1.0], LipMode::Estimated).is_ok());
    }

    #[test]
    fn discrete_metric_full_design_is_identity() {
        let vals = vec![3.0, -1.0, 7.5, 0.25];
        let i = build_interpolant(DesignSet::new(vec![0usize, 1, 2, 3]).unwrap(), vals.clone(), LipMode::Estimated).unwrap();
        for (x, v) in vals.iter().enumerate() {
            assert_eq!(i.value(&x), *v);
        }
        assert_eq!(covering_radius(i.design(), &[0, 1, 2, 3]), 0.0);
    }

    #[test]
    fn covering_radius_of_two_points() {
        let probe = grid_probe(&unit(1), 1001).unwrap();
        let r = covering_radius(&line(&[0.25, 0.75]), &probe);
        assert!((r - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_point_radius_reaches_farthest_corner() {
        let space = unit(2);
        let mut rng = stream(5, Purpose::Design, &[]);
        let d = sample_design_uniform(1, &space, &mut rng).unwrap();
        let p = &d.points[0];
        let corner = (p[0].max(1.0 - p[0]).powi(2) + p[1].max(1.0 - p[1]).powi(2)).sqrt();
        let probe = grid_probe(&space, 2).unwrap();
        assert!((covering_radius(&d, &probe) - corner).abs() < 1e-12);
    }

    #[test]
    fn uniform_design_moments() {
        let space = StateSpace::new_box(vec![-1.0, 2.0], vec![1.0, 6.0]).unwrap();
        let n = 20_000;
        let d = sample_design_uniform(n, &space, &mut stream(9, Purpose::Design, &[])).unwrap();
        assert!(d.points.iter().all(|p| (-1.0..1.0).contains(&p[0]) && (2.0..6.0).contains(&p[1])));
        let m0 = d.points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let m1 = d.points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
        // uniform on an interval of width w has sd w / sqrt(12)
        assert!(m0.abs() < 3.0 * 2.0 / (12.0 * n as f64).sqrt());
        assert!((m1 - 4.0).abs() < 3.0 * 4.0 / (12.0 * n as f64).sqrt());
        assert!(matches!(
            sample_design_uniform(3, &StateSpace::tabular(3).unwrap(), &mut stream(0, Purpose::Design, &[])),
            Err(Error::NotBox)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let i = build_interpolant(line(&[0.0, 0.4, 1.0]), vec![1.0, 0.5, -0.25], LipMode::Estimated).unwrap();
        let back = Interpolant::<Vec<f64>>::from_csv(&i.to_csv()).unwrap();
        assert_eq!(back, i);
    }

    #[test]
    fn grid_index_matches_brute_force() {
        let mut rng = stream(11, Purpose::Design, &[]);
        for (d, n) in [(1, 57), (2, 300), (4, 120)] {
            let design = sample_design_uniform(n, &unit(d), &mut rng).unwrap();
            let probe = uniform_probe(&unit(d), 2000, &mut rng).unwrap();
            let index = GridIndex::new(&design.points).unwrap();
            for x in &probe {
                assert_eq!(index.nearest_distance(x), design.nearest_distance(x));
            }
            assert_eq!(covering_radius_indexed(&design, &probe).unwrap(), covering_radius(&design, &probe));
        }
        // queries outside the indexed box
        let design = line(&[0.2, 0.4]);
        let index = GridIndex::new(&design.points).unwrap();
        assert!((index.nearest_distance(&[1.0]) - 0.6).abs() < 1e-15);
        assert!((index.nearest_distance(&[-1.0]) - 1.2).abs() < 1e-15);
    }
}
