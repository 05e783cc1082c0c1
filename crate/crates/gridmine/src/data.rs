//! Datasets, distance functions, partitioning and synthetic data generation
//! shared by all mining algorithms.
//!
//! Datasets are immutable after load and safe to share across concurrent
//! site computations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PointId = usize;

/// A d-dimensional numeric record. Serializes as a bare coordinate array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have d >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "point coordinates must be finite".into(),
            ));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

/// Distance metric used throughout the toolkit. The experiments in the
/// source algorithms admit either; Euclidean is the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    /// Distance between two coordinate slices of equal length.
    /// Callers are responsible for the dimension check; use [`distance`]
    /// for the checked variant.
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Checked distance between two points.
pub fn distance(a: &Point, b: &Point, metric: Metric) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(metric.dist(&a.coords, &b.coords))
}

/// An ordered list of points with stable integer identifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    ids: Vec<PointId>,
    points: Vec<Point>,
}

impl Dataset {
    /// Builds a dataset assigning ids 0..n in order.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let ids = (0..points.len()).collect();
        Self::from_parts(ids, points)
    }

    pub fn from_parts(ids: Vec<PointId>, points: Vec<Point>) -> Result<Self> {
        if ids.len() != points.len() {
            return Err(Error::InvalidParameter(
                "ids and points must have equal length".into(),
            ));
        }
        if let Some(first) = points.first() {
            let d = first.dim();
            for p in &points {
                if p.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: p.dim(),
                    });
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &ids {
            if !seen.insert(*id) {
                return Err(Error::InvalidParameter(format!("duplicate point id {id}")));
            }
        }
        Ok(Dataset { ids, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension of the feature space; 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, pos: usize) -> &Point {
        &self.points[pos]
    }

    pub fn id(&self, pos: usize) -> PointId {
        self.ids[pos]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, &Point)> {
        self.ids.iter().copied().zip(self.points.iter())
    }

    /// Splits the dataset into per-site datasets, preserving original ids.
    pub fn split(&self, partitioning: &Partitioning) -> Result<Vec<Dataset>> {
        let mut sites: Vec<(Vec<PointId>, Vec<Point>)> =
            vec![(Vec::new(), Vec::new()); partitioning.site_count()];
        for (id, point) in self.iter() {
            let site = partitioning.site_of(id).ok_or_else(|| {
                Error::InvalidParameter(format!("point id {id} missing from partitioning"))
            })?;
            sites[site].0.push(id);
            sites[site].1.push(point.clone());
        }
        sites
            .into_iter()
            .map(|(ids, points)| Dataset::from_parts(ids, points))
            .collect()
    }

    /// Writes the dataset as CSV with header `id,x0,x1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("id");
        for j in 0..self.dim() {
            write!(header, ",x{j}").unwrap();
        }
        writeln!(w, "{header}")?;
        for (id, p) in self.iter() {
            let mut line = id.to_string();
            for c in &p.coords {
                write!(line, ",{c}").unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a dataset from CSV produced by [`Dataset::write_csv`].
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        if !header.starts_with("id") {
            return Err(Error::Parse("missing `id,x0,...` header".into()));
        }
        let mut ids = Vec::new();
        let mut points = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id: PointId = fields
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: bad id: {e}", lineno + 2)))?;
            let coords = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: bad coord: {e}", lineno + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            ids.push(id);
            points.push(Point::new(coords)?);
        }
        Dataset::from_parts(ids, points)
    }

    pub fn read_csv_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Assignment of every point to exactly one of `m` sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partitioning {
    site_count: usize,
    assignment: BTreeMap<PointId, usize>,
}

impl Partitioning {
    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn site_of(&self, id: PointId) -> Option<usize> {
        self.assignment.get(&id).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<PointId, usize> {
        &self.assignment
    }

    /// Number of points assigned to each site.
    pub fn site_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.site_count];
        for &site in self.assignment.values() {
            sizes[site] += 1;
        }
        sizes
    }
}

/// Assigns point i (in dataset order) to site `i mod m`.
pub fn round_robin_partition(ds: &Dataset, m: usize) -> Result<Partitioning> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "site count m must be positive".into(),
        ));
    }
    let assignment = ds
        .ids()
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i % m))
        .collect();
    Ok(Partitioning {
        site_count: m,
        assignment,
    })
}

/// One Gaussian component of a synthetic mixture.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Vec<f64>,
    pub stdev: f64,
    pub count: usize,
}

/// Generator spec as stored on disk: `{components:[...], seed}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub components: Vec<GaussianComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Draws a deterministic Gaussian mixture sample. Components are emitted in
/// spec order; ids run 0..total.
pub fn gen_gaussian_mixture(components: &[GaussianComponent], seed: u64) -> Result<Dataset> {
    if components.is_empty() {
        return Err(Error::InvalidParameter(
            "mixture spec must have at least one component".into(),
        ));
    }
    let dim = components[0].center.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("component centers need d >= 1".into()));
    }
    for c in components {
        if c.center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.center.len(),
            });
        }
        if c.count == 0 {
            return Err(Error::InvalidParameter("component count must be >= 1".into()));
        }
        if !(c.stdev >= 0.0 && c.stdev.is_finite()) {
            return Err(Error::InvalidParameter(
                "component stdev must be finite and >= 0".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Vec::new();
    for c in components {
        for _ in 0..c.count {
            let coords = c
                .center
                .iter()
                .map(|&mu| mu + c.stdev * normal.sample(&mut rng))
                .collect();
            points.push(Point { coords });
        }
    }
    Dataset::new(points)
}
