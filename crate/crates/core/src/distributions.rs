//! Smoothing distributions and the localized parameterizations built from
//! them.

use crate::error::{Error, Result};
use crate::numerics::{Law, RngStream};

/// Diagonal Gaussian with per-dimension standard deviations; `+inf` marks a
/// fully randomized dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDiag {
    pub scales: Vec<f64>,
}

/// Uniform noise on `[x - λ, x + λ]` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    pub halfwidths: Vec<f64>,
}

/// Flips bit `d` with probability `θ_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliFlip {
    pub thetas: Vec<f64>,
}

/// Sets a zero bit with probability `θ⁺_d` and clears a one bit with
/// probability `θ⁻_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityAware {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
}

fn check_open_unit(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|&t| !(t > 0.0 && t < 1.0)) {
        Some(d) => Err(Error::Domain(format!("{name}[{d}] = {} must lie in (0,1)", v[d]))),
        None => Ok(()),
    }
}

impl GaussianDiag {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if let Some(d) = scales.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::Domain(format!("scale[{d}] = {} must be positive", scales[d])));
        }
        Ok(GaussianDiag { scales })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; dim])
    }
}

impl UniformBox {
    pub fn new(halfwidths: Vec<f64>) -> Result<Self> {
        if let Some(d) = halfwidths.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::Domain(format!("halfwidth[{d}] = {} must be positive", halfwidths[d])));
        }
        Ok(UniformBox { halfwidths })
    }
}

impl BernoulliFlip {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        check_open_unit("theta", &thetas)?;
        Ok(BernoulliFlip { thetas })
    }
}

impl SparsityAware {
    pub fn new(theta_plus: Vec<f64>, theta_minus: Vec<f64>) -> Result<Self> {
        if theta_plus.len() != theta_minus.len() {
            return Err(Error::Shape(format!(
                "theta_plus has {} entries, theta_minus {}",
                theta_plus.len(),
                theta_minus.len()
            )));
        }
        check_open_unit("theta_plus", &theta_plus)?;
        check_open_unit("theta_minus", &theta_minus)?;
        Ok(SparsityAware { theta_plus, theta_minus })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Smoothing {
    Gaussian(GaussianDiag),
    Uniform(UniformBox),
    Bernoulli(BernoulliFlip),
    Sparsity(SparsityAware),
}

impl Smoothing {
    pub fn dim(&self) -> usize {
        match self {
            Smoothing::Gaussian(g) => g.scales.len(),
            Smoothing::Uniform(u) => u.halfwidths.len(),
            Smoothing::Bernoulli(b) => b.thetas.len(),
            Smoothing::Sparsity(s) => s.theta_plus.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Smoothing::Bernoulli(_) | Smoothing::Sparsity(_))
    }

    /// Draws one perturbed input `z ~ Ψ_x`; draw `d` of `stream` drives
    /// dimension `d`.
    pub fn sample(&self, x: &[f64], stream: RngStream) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("input has {} dims, distribution {}", x.len(), self.dim())));
        }
        if self.is_discrete() {
            check_binary(x)?;
        }
        let mut r = stream.reader();
        let z = match self {
            Smoothing::Gaussian(g) => x
                .iter()
                .zip(&g.scales)
                .map(|(&xd, &s)| {
                    let n = r.next(Law::StandardNormal);
                    if n == 0.0 {
                        xd
                    } else {
                        xd + s * n
                    }
                })
                .collect(),
            Smoothing::Uniform(u) => {
                x.iter().zip(&u.halfwidths).map(|(&xd, &l)| xd + l * (2.0 * r.next(Law::Uniform01) - 1.0)).collect()
            }
            Smoothing::Bernoulli(b) => x
                .iter()
                .zip(&b.thetas)
                .map(|(&xd, &t)| {
                    let flip = r.next(Law::Uniform01) < t;
                    if flip {
                        1.0 - xd
                    } else {
                        xd
                    }
                })
                .collect(),
            Smoothing::Sparsity(s) => x
                .iter()
                .enumerate()
                .map(|(d, &xd)| {
                    let u = r.next(Law::Uniform01);
                    if xd == 0.0 {
                        (u < s.theta_plus[d]) as u8 as f64
                    } else {
                        (u >= s.theta_minus[d]) as u8 as f64
                    }
                })
                .collect(),
        };
        Ok(z)
    }

    /// Probability that dimension `d` of a sample equals `zd` given `xd`.
    /// Only defined for the discrete families.
    pub(crate) fn dim_mass(&self, d: usize, xd: bool, zd: bool) -> f64 {
        match self {
            Smoothing::Bernoulli(b) => {
                if xd == zd {
                    1.0 - b.thetas[d]
                } else {
                    b.thetas[d]
                }
            }
            Smoothing::Sparsity(s) => match (xd, zd) {
                (false, false) => 1.0 - s.theta_plus[d],
                (false, true) => s.theta_plus[d],
                (true, false) => s.theta_minus[d],
                (true, true) => 1.0 - s.theta_minus[d],
            },
            _ => f64::NAN,
        }
    }
}

pub(crate) fn check_binary(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(d) => Err(Error::Domain(format!("entry {d} = {} is not binary", x[d]))),
        None => Ok(()),
    }
}

/// Exact probability mass `π_x(z)` of a discrete smoothing distribution.
pub fn exact_pmf(dist: &Smoothing, x: &[f64], z: &[f64]) -> Result<f64> {
    if !dist.is_discrete() {
        return Err(Error::Domain("exact pmf needs a discrete distribution".into()));
    }
    if x.len() != dist.dim() || z.len() != dist.dim() {
        return Err(Error::Shape(format!(
            "pmf of {}-dim distribution at x of {} dims, z of {} dims",
            dist.dim(),
            x.len(),
            z.len()
        )));
    }
    check_binary(x)?;
    check_binary(z)?;
    Ok((0..x.len()).map(|d| dist.dim_mass(d, x[d] == 1.0, z[d] == 1.0)).product())
}

/// Output partition with one smoothing distribution per output subset.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedScheme {
    pub subsets: Vec<Vec<usize>>,
    pub dists: Vec<Smoothing>,
}

impl LocalizedScheme {
    pub fn new(subsets: Vec<Vec<usize>>, dists: Vec<Smoothing>, d_out: usize) -> Result<Self> {
        if subsets.len() != dists.len() {
            return Err(Error::Config(format!("{} output subsets but {} distributions", subsets.len(), dists.len())));
        }
        check_partition(&subsets, d_out, "output")?;
        if let Some(first) = dists.first() {
            if let Some(i) = dists.iter().position(|d| d.dim() != first.dim()) {
                return Err(Error::Shape(format!("distribution of output subset {i} has a different dimension")));
            }
        }
        Ok(LocalizedScheme { subsets, dists })
    }

    /// A single distribution shared by all outputs.
    pub fn isotropic(dist: Smoothing, d_out: usize) -> Self {
        LocalizedScheme { subsets: vec![(0..d_out).collect()], dists: vec![dist] }
    }

    pub fn num_outputs(&self) -> usize {
        self.subsets.iter().map(Vec::len).sum()
    }

    /// Subset index of every output.
    pub fn subset_of_output(&self) -> Vec<usize> {
        let mut of = vec![0; self.num_outputs()];
        for (i, k) in self.subsets.iter().enumerate() {
            for &n in k {
                of[n] = i;
            }
        }
        of
    }

    pub fn dist_for_output(&self, n: usize) -> &Smoothing {
        let i = self.subsets.iter().position(|k| k.contains(&n)).expect("validated partition");
        &self.dists[i]
    }
}

/// Checks that `subsets` partitions `0..n` exactly.
pub fn check_partition(subsets: &[Vec<usize>], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    for (i, k) in subsets.iter().enumerate() {
        for &e in k {
            if e >= n {
                return Err(Error::Config(format!("{what} subset {i} contains index {e} out of range {n}")));
            }
            if seen[e] {
                return Err(Error::Config(format!("{what} index {e} appears in more than one subset")));
            }
            seen[e] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(e) => Err(Error::Config(format!("{what} index {e} is not covered by any subset"))),
        None => Ok(()),
    }
}

/// Scales of the grid-localized Gaussian for the output subset at 1-based
/// cell `target` of an `h × w` grid.
///
/// Dimension `d` in cell `(k, l)` gets
/// `σ_min + (σ_max − σ_min) · max(|i − k|, |l − j|) / w`.
pub fn grid_gaussian_scales(
    h: usize,
    w: usize,
    sigma_min: f64,
    sigma_max: f64,
    target: (usize, usize),
    cell_of_dim: &[Option<(usize, usize)>],
) -> Result<Vec<f64>> {
    let (i, j) = target;
    if !(1..=h).contains(&i) || !(1..=w).contains(&j) {
        return Err(Error::Config(format!("target cell ({i},{j}) outside a {h}x{w} grid")));
    }
    if !(sigma_min > 0.0) || !(sigma_max >= sigma_min) {
        return Err(Error::Config(format!("need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}")));
    }
    cell_of_dim
        .iter()
        .enumerate()
        .map(|(d, cell)| {
            let (k, l) = cell.ok_or_else(|| Error::Config(format!("input dimension {d} has no grid cell")))?;
            if !(1..=h).contains(&k) || !(1..=w).contains(&l) {
                return Err(Error::Config(format!("input dimension {d} assigned to cell ({k},{l}) outside the grid")));
            }
            let dist = i.abs_diff(k).max(l.abs_diff(j));
            Ok(if dist == 0 || sigma_max == sigma_min {
                sigma_min
            } else {
                sigma_min + (sigma_max - sigma_min) * dist as f64 / w as f64
            })
        })
        .collect()
}

/// Row-major tiling of a `rows × cols` layout into an `h × w` grid of
/// 1-based cells.
pub fn grid_tiling(rows: usize, cols: usize, h: usize, w: usize) -> Result<Vec<Option<(usize, usize)>>> {
    if h == 0 || w == 0 || h > rows || w > cols {
        return Err(Error::Config(format!("a {h}x{w} grid cannot tile a {rows}x{cols} layout")));
    }
    Ok((0..rows * cols)
        .map(|d| {
            let (r, c) = (d / cols, d % cols);
            Some((r * h / rows + 1, c * w / cols + 1))
        })
        .collect())
}

/// For every cluster `j`, the clusters ordered by decreasing edge count to
/// `j`, with `j` itself first and ties broken by index.
pub fn cluster_affinity_ranking(edge_counts: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let n = edge_counts.len();
    if let Some(r) = edge_counts.iter().position(|row| row.len() != n) {
        return Err(Error::Shape(format!("edge count row {r} has {} entries, expected {n}", edge_counts[r].len())));
    }
    if edge_counts.iter().flatten().any(|&v| !(v >= 0.0)) {
        return Err(Error::Input("edge counts must be nonnegative".into()));
    }
    Ok((0..n)
        .map(|j| {
            let mut others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            others.sort_by(|&a, &b| edge_counts[b][j].total_cmp(&edge_counts[a][j]).then(a.cmp(&b)));
            std::iter::once(j).chain(others).collect()
        })
        .collect())
}

/// Flip probability for every `(target, source)` cluster pair: the source
/// ranked `r`-th for the target gets the `r`-th of `n_clusters` evenly
/// spaced values from `θ_min` to `θ_max`.
pub fn cluster_sparsity_thetas(
    ranking: &[Vec<usize>],
    theta_min: f64,
    theta_max: f64,
    n_clusters: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&theta_min) || !(0.0..=1.0).contains(&theta_max) || theta_min > theta_max {
        return Err(Error::Config(format!("need 0 <= theta_min <= theta_max <= 1, got {theta_min}, {theta_max}")));
    }
    if ranking.len() != n_clusters {
        return Err(Error::Config(format!("ranking covers {} clusters, expected {n_clusters}", ranking.len())));
    }
    let value = |r: usize| {
        if n_clusters <= 1 {
            theta_min
        } else {
            theta_min + (theta_max - theta_min) * r as f64 / (n_clusters - 1) as f64
        }
    };
    ranking
        .iter()
        .enumerate()
        .map(|(target, order)| {
            if order.len() != n_clusters {
                return Err(Error::Config(format!("ranking of cluster {target} has {} entries", order.len())));
            }
            let mut thetas = vec![f64::NAN; n_clusters];
            for (r, &src) in order.iter().enumerate() {
                if src >= n_clusters {
                    return Err(Error::Config(format!("cluster {src} out of range in ranking of {target}")));
                }
                thetas[src] = value(r);
            }
            if thetas.iter().any(|t| t.is_nan()) {
                return Err(Error::Config(format!("ranking of cluster {target} is not a permutation")));
            }
            Ok(thetas)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_gaussian_noise_keeps_input() {
        let x = vec![0.3, -1.0, 2.0];
        let g = Smoothing::Gaussian(GaussianDiag::isotropic(3, 1e-300).unwrap());
        let z = g.sample(&x, RngStream::new(1, 2)).unwrap();
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).abs() < 1e-290);
        }
    }

    #[test]
    fn bernoulli_half_flip_rate() {
        let b = Smoothing::Bernoulli(BernoulliFlip::new(vec![0.5; 4]).unwrap());
        let x = [0.0, 1.0, 0.0, 1.0];
        let n = 100_000;
        let mut flips = [0usize; 4];
        for s in 0..n {
            let z = b.sample(&x, RngStream::new(9, s)).unwrap();
            for d in 0..4 {
                flips[d] += (z[d] != x[d]) as usize;
            }
        }
        for f in flips {
            assert!((f as f64 / n as f64 - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn sparsity_deletion_rate() {
        let s = Smoothing::Sparsity(SparsityAware::new(vec![0.01; 3], vec![0.6; 3]).unwrap());
        let x = [1.0; 3];
        let n = 100_000u64;
        let mut deleted = 0usize;
        for i in 0..n {
            deleted += s.sample(&x, RngStream::new(3, i)).unwrap().iter().filter(|&&v| v == 0.0).count();
        }
        assert!((deleted as f64 / (3 * n) as f64 - 0.6).abs() < 0.01);
    }

    #[test]
    fn sample_rejects_bad_shapes() {
        let b = Smoothing::Bernoulli(BernoulliFlip::new(vec![0.2; 2]).unwrap());
        assert!(matches!(b.sample(&[0.0], RngStream::new(0, 0)), Err(Error::Shape(_))));
        assert!(matches!(b.sample(&[0.0, 0.5], RngStream::new(0, 0)), Err(Error::Domain(_))));
        assert!(BernoulliFlip::new(vec![0.0]).is_err());
        assert!(SparsityAware::new(vec![0.5], vec![1.0]).is_err());
        assert!(GaussianDiag::new(vec![0.0]).is_err());
        assert!(GaussianDiag::new(vec![f64::INFINITY]).is_ok());
    }

    #[test]
    fn grid_scales_examples() {
        let cells = vec![Some((1, 1)), Some((1, 2)), Some((2, 1)), Some((2, 2))];
        let s = grid_gaussian_scales(2, 2, 0.1, 0.5, (1, 1), &cells).unwrap();
        assert_eq!(s[0], 0.1);
        assert!((s[3] - 0.3).abs() < 1e-15);
        let s = grid_gaussian_scales(2, 2, 0.25, 0.25, (2, 1), &cells).unwrap();
        assert!(s.iter().all(|&v| v == 0.25));
        let s = grid_gaussian_scales(2, 2, 0.2, f64::INFINITY, (1, 1), &cells).unwrap();
        assert_eq!(s[0], 0.2);
        assert!(s[1..].iter().all(|v| v.is_infinite()));
        let mut missing = cells.clone();
        missing[2] = None;
        assert!(matches!(grid_gaussian_scales(2, 2, 0.1, 0.5, (1, 1), &missing), Err(Error::Config(_))));
    }

    #[test]
    fn grid_scales_grow_with_cell_distance() {
        let cells = grid_tiling(6, 8, 3, 4).unwrap();
        for ti in 1..=3 {
            for tj in 1..=4 {
                let s = grid_gaussian_scales(3, 4, 0.1, 1.0, (ti, tj), &cells).unwrap();
                for a in 0..cells.len() {
                    for b in 0..cells.len() {
                        let (ka, la) = cells[a].unwrap();
                        let (kb, lb) = cells[b].unwrap();
                        let da = ti.abs_diff(ka).max(la.abs_diff(tj));
                        let db = ti.abs_diff(kb).max(lb.abs_diff(tj));
                        if da <= db {
                            assert!(s[a] <= s[b]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tiling_is_row_major() {
        let t = grid_tiling(2, 4, 1, 2).unwrap();
        let want = [(1, 1), (1, 1), (1, 2), (1, 2), (1, 1), (1, 1), (1, 2), (1, 2)];
        assert_eq!(t, want.iter().map(|&c| Some(c)).collect::<Vec<_>>());
        assert!(grid_tiling(2, 2, 3, 1).is_err());
    }

    #[test]
    fn affinity_ranking_examples() {
        let r = cluster_affinity_ranking(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
        assert_eq!(r, vec![vec![0, 1], vec![1, 0]]);
        let n = vec![vec![9.0, 4.0, 0.0], vec![4.0, 9.0, 1.0], vec![0.0, 1.0, 9.0]];
        let r = cluster_affinity_ranking(&n).unwrap();
        assert_eq!(r[1], vec![1, 0, 2]);
        let r = cluster_affinity_ranking(&vec![vec![1.0; 4]; 4]).unwrap();
        assert_eq!(r[2], vec![2, 0, 1, 3]);
        assert!(matches!(cluster_affinity_ranking(&[vec![1.0, 2.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn cluster_thetas_examples() {
        let ranking: Vec<Vec<usize>> =
            (0..11).map(|j| std::iter::once(j).chain((0..11).filter(move |&i| i != j)).collect()).collect();
        let t = cluster_sparsity_thetas(&ranking, 0.0, 1.0, 11).unwrap();
        // cluster 0 ranks cluster 1 second
        assert!((t[0][1] - 0.1).abs() < 1e-15);
        assert_eq!(t[3][3], 0.0);
        let t = cluster_sparsity_thetas(&ranking, 0.3, 0.3, 11).unwrap();
        assert!(t.iter().flatten().all(|&v| v == 0.3));
        assert!(cluster_sparsity_thetas(&ranking, 0.3, 0.3, 10).is_err());
    }

    #[test]
    fn pmf_examples() {
        let b = Smoothing::Bernoulli(BernoulliFlip::new(vec![0.1, 0.2]).unwrap());
        assert!((exact_pmf(&b, &[0.0, 1.0], &[0.0, 1.0]).unwrap() - 0.72).abs() < 1e-15);
        let h = Smoothing::Bernoulli(BernoulliFlip::new(vec![0.5]).unwrap());
        assert_eq!(exact_pmf(&h, &[1.0], &[0.0]).unwrap(), 0.5);
        assert_eq!(exact_pmf(&h, &[1.0], &[1.0]).unwrap(), 0.5);
        assert!(exact_pmf(&h, &[0.5], &[1.0]).is_err());
    }

    fn all_binary(d: usize) -> impl Iterator<Item = Vec<f64>> {
        (0..1u32 << d).map(move |m| (0..d).map(|i| ((m >> i) & 1) as f64).collect())
    }

    #[test]
    fn pmf_normalizes_and_sparsity_reduces_to_flip() {
        let thetas = vec![0.1, 0.35, 0.5, 0.8];
        let b = Smoothing::Bernoulli(BernoulliFlip::new(thetas.clone()).unwrap());
        let s = Smoothing::Sparsity(SparsityAware::new(thetas.clone(), thetas).unwrap());
        let sa = Smoothing::Sparsity(SparsityAware::new(vec![0.05, 0.3, 0.6, 0.2], vec![0.7, 0.1, 0.4, 0.9]).unwrap());
        for x in all_binary(4) {
            let mut total = [0.0; 2];
            for z in all_binary(4) {
                let pb = exact_pmf(&b, &x, &z).unwrap();
                assert_eq!(pb, exact_pmf(&s, &x, &z).unwrap());
                total[0] += pb;
                total[1] += exact_pmf(&sa, &x, &z).unwrap();
            }
            assert!((total[0] - 1.0).abs() < 1e-12);
            assert!((total[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scheme_partition_checks() {
        let g = || Smoothing::Bernoulli(BernoulliFlip::new(vec![0.2; 3]).unwrap());
        assert!(LocalizedScheme::new(vec![vec![0, 2], vec![1]], vec![g(), g()], 3).is_ok());
        assert!(LocalizedScheme::new(vec![vec![0, 1], vec![1, 2]], vec![g(), g()], 3).is_err());
        assert!(LocalizedScheme::new(vec![vec![0], vec![1]], vec![g(), g()], 3).is_err());
        assert!(LocalizedScheme::new(vec![vec![0, 1, 2]], vec![g(), g()], 3).is_err());
        let s = LocalizedScheme::new(vec![vec![2], vec![0, 1]], vec![g(), g()], 3).unwrap();
        assert_eq!(s.subset_of_output(), vec![1, 1, 0]);
    }
}
