//! Epistemic network analysis.
//!
//! Each unit (a student, optionally per semester) gets one adjacency vector
//! per coding source over the unordered code pairs. Vectors are scaled to
//! unit length, centered, and projected onto a means-rotation axis (MR1,
//! pointing from the human group mean towards the algorithm group mean)
//! followed by the singular vectors of what remains (SVD2, SVD3, …). Code
//! nodes are then placed by least squares so that each unit's
//! weight-averaged edge midpoint lands near its projected point.
//!
//! Units whose vectors are all zero carry no connection information: they
//! are left out of centering and projection but still listed in the space,
//! and they count towards group mean networks.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodedRow, Source, UnitKey};

#[derive(Debug, Error)]
pub enum EnaError {
    #[error("ENA needs at least two codes, got {0}")]
    TooFewCodes(usize),
    #[error("duplicate code `{0}`")]
    DuplicateCode(String),
    #[error("row {entry_id} has no flag for code `{code}`")]
    MissingCode { entry_id: u64, code: String },
    #[error("no {0} unit has any connection; both groups need at least one non-zero network")]
    EmptyGroup(Source),
    #[error(
        "the two group means coincide (distance {0:.3e}), so there is no means-rotation axis; use a plain SVD projection instead"
    )]
    DegenerateRotation(f64),
    #[error("vector of length {got} does not match {expected} code pairs")]
    Dimension { expected: usize, got: usize },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
}

pub type Result<T> = std::result::Result<T, EnaError>;

/// Number of axes used for plotting and node placement.
pub const PLOT_AXES: usize = 2;
const SINGULAR_TOL: f64 = 1e-10;

/// How co-occurrences inside a unit's whole conversation are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// 1 if both codes occur anywhere in the unit's rows.
    #[default]
    Binary,
    /// Each row, in time order, connects its codes with every code seen in
    /// that row or earlier; connections are summed.
    Count,
}

impl std::str::FromStr for Accumulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Accumulation::Binary),
            "count" => Ok(Accumulation::Count),
            other => Err(format!("unknown accumulation `{other}` (expected binary or count)")),
        }
    }
}

/// Codes sorted by name and the unordered pairs between them, in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOrder {
    pub codes: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
}

impl PairOrder {
    pub fn new(codes: &[String]) -> Result<Self> {
        let mut codes = codes.to_vec();
        codes.sort();
        if let Some(w) = codes.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnaError::DuplicateCode(w[0].clone()));
        }
        if codes.len() < 2 {
            return Err(EnaError::TooFewCodes(codes.len()));
        }
        let c = codes.len();
        let pairs = (0..c).flat_map(|i| (i + 1..c).map(move |j| (i, j))).collect();
        Ok(PairOrder { codes, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<(String, String)> {
        self.pairs.iter().map(|&(i, j)| (self.codes[i].clone(), self.codes[j].clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyVector {
    pub unit_id: String,
    pub source: Source,
    /// Number of coded rows behind the vector.
    pub rows: usize,
    pub weights: Vec<f64>,
}

/// One adjacency vector per (unit, source), sorted by unit id then source.
pub fn accumulate(
    rows: &[CodedRow],
    order: &PairOrder,
    unit_key: UnitKey,
    mode: Accumulation,
) -> Result<Vec<AdjacencyVector>> {
    let mut groups: BTreeMap<(String, Source), Vec<&CodedRow>> = BTreeMap::new();
    for r in rows {
        for code in &order.codes {
            if !r.code_flags.contains_key(code) {
                return Err(EnaError::MissingCode { entry_id: r.entry_id, code: code.clone() });
            }
        }
        groups.entry((unit_key.unit_id(&r.user_id, r.semester.as_deref()), r.source)).or_default().push(r);
    }
    let groups: Vec<_> = groups.into_iter().collect();
    Ok(groups
        .into_par_iter()
        .map(|((unit_id, source), mut unit_rows)| {
            unit_rows.sort_by_key(|r| (r.timestamp, r.entry_id));
            let flags: Vec<Vec<bool>> =
                unit_rows.iter().map(|r| order.codes.iter().map(|c| r.flag(c)).collect()).collect();
            let weights = match mode {
                Accumulation::Binary => binary_weights(&flags, order),
                Accumulation::Count => count_weights(&flags, order),
            };
            AdjacencyVector { unit_id, source, rows: unit_rows.len(), weights }
        })
        .collect())
}

fn binary_weights(flags: &[Vec<bool>], order: &PairOrder) -> Vec<f64> {
    let any: Vec<bool> = (0..order.codes.len()).map(|c| flags.iter().any(|f| f[c])).collect();
    order.pairs.iter().map(|&(i, j)| if any[i] && any[j] { 1.0 } else { 0.0 }).collect()
}

fn count_weights(flags: &[Vec<bool>], order: &PairOrder) -> Vec<f64> {
    let mut seen = vec![false; order.codes.len()];
    let mut out = vec![0.0; order.len()];
    for row in flags {
        for (s, &f) in seen.iter_mut().zip(row) {
            *s |= f;
        }
        for (w, &(i, j)) in out.iter_mut().zip(&order.pairs) {
            if (row[i] && seen[j]) || (row[j] && seen[i]) {
                *w += 1.0;
            }
        }
    }
    out
}

/// Scales a vector to unit length; all-zero input stays zero and is flagged.
pub fn normalize_spherical(v: &[f64]) -> (Vec<f64>, bool) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        (vec![0.0; v.len()], true)
    } else {
        (v.iter().map(|x| x / norm).collect(), false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnaUnit {
    pub id: String,
    pub source: Source,
    pub rows: usize,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// True when the unit has no connections and was left out of the
    /// projection.
    pub zero: bool,
    /// Coordinates on every retained axis; `None` for zero units.
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub code: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goodness {
    pub axis: String,
    /// Pearson correlation between unit points and network centroids;
    /// `None` when either side has no variance.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    /// `positions[code][axis]`.
    pub positions: Vec<Vec<f64>>,
    pub goodness: Vec<Option<f64>>,
    /// Sum of squared point–centroid distances per axis.
    pub residual: Vec<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnaSpace {
    pub accumulation: Accumulation,
    pub unit_key: UnitKey,
    pub codes: Vec<String>,
    pub pair_order: Vec<(String, String)>,
    pub units: Vec<EnaUnit>,
    pub mean_center: Vec<f64>,
    pub axis_labels: Vec<String>,
    /// Orthonormal axes over the pair space, MR1 first.
    pub axes: Vec<Vec<f64>>,
    /// Share of the centered data's total variance on each axis.
    pub variance: Vec<f64>,
    pub node_positions: Vec<NodePosition>,
    pub goodness: Vec<Goodness>,
    pub registration_rank: usize,
}

fn axis_label(i: usize) -> String {
    if i == 0 {
        "MR1".into()
    } else {
        format!("SVD{}", i + 1)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components along `basis` and rescales; `None` if nothing
/// substantial is left.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let n = dot(&v, &v).sqrt();
    (n > 1e-8).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Flips `v` so its largest-magnitude component is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Builds the projected space from adjacency vectors of both sources.
pub fn project_means_rotation(
    vectors: &[AdjacencyVector],
    order: &PairOrder,
    accumulation: Accumulation,
    unit_key: UnitKey,
) -> Result<EnaSpace> {
    let p = order.len();
    let mut units: Vec<EnaUnit> = vectors
        .iter()
        .map(|v| {
            if v.weights.len() != p {
                return Err(EnaError::Dimension { expected: p, got: v.weights.len() });
            }
            let (normalized, zero) = normalize_spherical(&v.weights);
            Ok(EnaUnit {
                id: v.unit_id.clone(),
                source: v.source,
                rows: v.rows,
                raw: v.weights.clone(),
                normalized,
                zero,
                point: None,
            })
        })
        .collect::<Result<_>>()?;

    let included: Vec<usize> = (0..units.len()).filter(|&i| !units[i].zero).collect();
    let group_mean = |source: Source| -> Result<Vec<f64>> {
        let members: Vec<&EnaUnit> = included.iter().map(|&i| &units[i]).filter(|u| u.source == source).collect();
        if members.is_empty() {
            return Err(EnaError::EmptyGroup(source));
        }
        Ok(mean_of(members.iter().map(|u| u.normalized.as_slice()), p))
    };
    let mean_alg = group_mean(Source::Algorithm)?;
    let mean_hum = group_mean(Source::Human)?;
    let diff: Vec<f64> = mean_alg.iter().zip(&mean_hum).map(|(a, b)| a - b).collect();
    let diff_norm = dot(&diff, &diff).sqrt();
    if diff_norm < 1e-12 {
        return Err(EnaError::DegenerateRotation(diff_norm));
    }
    let mr1: Vec<f64> = diff.iter().map(|x| x / diff_norm).collect();

    let mean_center = mean_of(included.iter().map(|&i| units[i].normalized.as_slice()), p);
    let n = included.len();
    let centered = DMatrix::from_fn(n, p, |r, c| units[included[r]].normalized[c] - mean_center[c]);

    // Residual after taking out MR1, then its right singular vectors.
    let mr1_vec = DVector::from_column_slice(&mr1);
    let along = &centered * &mr1_vec;
    let residual = &centered - along * mr1_vec.transpose();
    let svd = residual.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut ranked: Vec<usize> = (0..svd.singular_values.len()).collect();
    ranked.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut axes = vec![mr1];
    for idx in ranked {
        if svd.singular_values[idx] <= SINGULAR_TOL {
            break;
        }
        let row: Vec<f64> = v_t.row(idx).iter().copied().collect();
        if let Some(mut axis) = orthonormalize(row, &axes) {
            fix_sign(&mut axis);
            axes.push(axis);
        }
    }
    // Keep at least two plot axes when the pair space allows it.
    let mut e = 0;
    while axes.len() < PLOT_AXES.min(p) && e < p {
        let mut basis = vec![0.0; p];
        basis[e] = 1.0;
        if let Some(axis) = orthonormalize(basis, &axes) {
            axes.push(axis);
        }
        e += 1;
    }

    let total_var: f64 = centered.iter().map(|x| x * x).sum();
    let mut variance = vec![0.0; axes.len()];
    let mut points = Vec::with_capacity(n);
    for (r, &ui) in included.iter().enumerate() {
        let row: Vec<f64> = centered.row(r).iter().copied().collect();
        let pt: Vec<f64> = axes.iter().map(|a| dot(&row, a)).collect();
        for (v, x) in variance.iter_mut().zip(&pt) {
            *v += x * x;
        }
        units[ui].point = Some(pt.clone());
        points.push(pt);
    }
    if total_var > 0.0 {
        variance.iter_mut().for_each(|v| *v /= total_var);
    }

    let plot = PLOT_AXES.min(axes.len());
    let normalized: Vec<Vec<f64>> = included.iter().map(|&i| units[i].normalized.clone()).collect();
    let plot_points: Vec<Vec<f64>> = points.iter().map(|pt| pt[..plot].to_vec()).collect();
    let reg = register_nodes(&normalized, &plot_points, order);
    if reg.rank < order.codes.len() {
        warn!(
            "node registration is rank deficient ({} of {} codes); using the minimum-norm solution",
            reg.rank,
            order.codes.len()
        );
    }
    let axis_labels: Vec<String> = (0..axes.len()).map(axis_label).collect();
    let node_positions = order
        .codes
        .iter()
        .zip(&reg.positions)
        .map(|(code, pos)| NodePosition {
            code: code.clone(),
            x: pos.first().copied().unwrap_or(0.0),
            y: pos.get(1).copied().unwrap_or(0.0),
        })
        .collect();
    let goodness =
        reg.goodness.iter().enumerate().map(|(i, g)| Goodness { axis: axis_labels[i].clone(), pearson: *g }).collect();

    Ok(EnaSpace {
        accumulation,
        unit_key,
        codes: order.codes.clone(),
        pair_order: order.labels(),
        units,
        mean_center,
        axis_labels,
        axes,
        variance,
        node_positions,
        goodness,
        registration_rank: reg.rank,
    })
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a [f64]>, p: usize) -> Vec<f64> {
    let mut sum = vec![0.0; p];
    let mut n = 0usize;
    for r in rows {
        sum.iter_mut().zip(r).for_each(|(s, x)| *s += x);
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

/// Row `u` maps node coordinates to unit `u`'s network centroid: each code
/// receives half the weight of every edge it touches, divided by the unit's
/// total edge weight. Rows of units without edges are zero.
pub fn registration_matrix(normalized: &[Vec<f64>], order: &PairOrder) -> DMatrix<f64> {
    let c = order.codes.len();
    let mut a = DMatrix::zeros(normalized.len(), c);
    for (u, w) in normalized.iter().enumerate() {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            continue;
        }
        for (&weight, &(i, j)) in w.iter().zip(&order.pairs) {
            a[(u, i)] += weight / (2.0 * total);
            a[(u, j)] += weight / (2.0 * total);
        }
    }
    a
}

/// Least-squares node placement, one axis at a time, with the
/// minimum-norm solution when the system is rank deficient.
pub fn register_nodes(normalized: &[Vec<f64>], points: &[Vec<f64>], order: &PairOrder) -> Registration {
    let c = order.codes.len();
    let dims = points.first().map_or(0, Vec::len);
    let a = registration_matrix(normalized, order);
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = SINGULAR_TOL * max_sv.max(1.0);
    let rank = svd.rank(eps);

    let mut positions = vec![vec![0.0; dims]; c];
    let mut goodness = Vec::with_capacity(dims);
    let mut residual = Vec::with_capacity(dims);
    for d in 0..dims {
        let b = DVector::from_iterator(points.len(), points.iter().map(|p| p[d]));
        let q = svd.solve(&b, eps).expect("U and V were computed");
        for (node, pos) in positions.iter_mut().enumerate() {
            pos[d] = q[node];
        }
        let centroids = &a * &q;
        residual.push((&centroids - &b).norm_squared());
        goodness.push(pearson(b.as_slice(), centroids.as_slice()));
    }
    Registration { positions, goodness, residual, rank }
}

/// Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 1e-24 || syy <= 1e-24 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Unit,
    GroupMean,
    Difference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub kind: NetworkKind,
    pub label: String,
    pub nodes: Vec<NodePosition>,
    pub edges: Vec<Edge>,
}

impl NetworkGraph {
    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a)).map(|e| e.weight)
    }
}

impl EnaSpace {
    fn graph(&self, kind: NetworkKind, label: String, weights: &[f64]) -> NetworkGraph {
        let edges = self
            .pair_order
            .iter()
            .zip(weights)
            .map(|((a, b), &weight)| Edge { a: a.clone(), b: b.clone(), weight })
            .collect();
        NetworkGraph { kind, label, nodes: self.node_positions.clone(), edges }
    }

    /// Mean normalized network of every unit from `source`.
    pub fn group_network(&self, source: Source) -> Result<NetworkGraph> {
        let members: Vec<&EnaUnit> = self.units.iter().filter(|u| u.source == source).collect();
        if members.is_empty() {
            return Err(EnaError::EmptyGroup(source));
        }
        let mean = mean_of(members.iter().map(|u| u.normalized.as_slice()), self.pair_order.len());
        Ok(self.graph(NetworkKind::GroupMean, source.to_string(), &mean))
    }

    pub fn unit_network(&self, unit_id: &str, source: Source) -> Result<NetworkGraph> {
        let unit = self
            .units
            .iter()
            .find(|u| u.id == unit_id && u.source == source)
            .ok_or_else(|| EnaError::UnknownUnit(format!("{unit_id} ({source})")))?;
        Ok(self.graph(NetworkKind::Unit, format!("{unit_id} ({source})"), &unit.normalized))
    }

    /// Coordinates of the projected units of one source on one axis.
    pub fn group_points(&self, source: Source, axis: usize) -> Vec<f64> {
        self.units.iter().filter(|u| u.source == source).filter_map(|u| u.point.as_ref().map(|p| p[axis])).collect()
    }

    pub fn excluded_units(&self) -> Vec<&EnaUnit> {
        self.units.iter().filter(|u| u.zero).collect()
    }
}

/// Edge-wise `a − b`.
pub fn difference_network(a: &NetworkGraph, b: &NetworkGraph) -> NetworkGraph {
    let edges = a
        .edges
        .iter()
        .map(|e| Edge { a: e.a.clone(), b: e.b.clone(), weight: e.weight - b.weight(&e.a, &e.b).unwrap_or(0.0) })
        .collect();
    NetworkGraph {
        kind: NetworkKind::Difference,
        label: format!("{} - {}", a.label, b.label),
        nodes: a.nodes.clone(),
        edges,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthRow {
    pub a: String,
    pub b: String,
    pub first: f64,
    pub second: f64,
}

/// Connection strengths of two networks side by side, strongest (in the
/// first network) first.
pub fn strength_table(first: &NetworkGraph, second: &NetworkGraph) -> Vec<StrengthRow> {
    let mut rows: Vec<StrengthRow> = first
        .edges
        .iter()
        .map(|e| StrengthRow {
            a: e.a.clone(),
            b: e.b.clone(),
            first: e.weight,
            second: second.weight(&e.a, &e.b).unwrap_or(0.0),
        })
        .collect();
    rows.sort_by(|x, y| y.first.total_cmp(&x.first).then(y.second.total_cmp(&x.second)));
    rows
}
