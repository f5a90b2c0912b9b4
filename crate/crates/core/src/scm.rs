//! Exact front-door computations over a four-variable discrete causal model.
//!
//! The graph is fixed: `C -> X`, `X -> S`, `(S, C) -> Y`. `C` confounds `X`
//! and `Y`; `S` mediates every causal path from `X` to `Y`. All quantities
//! are computed by full enumeration, which stays below 4096 joint cells
//! because every cardinality is capped at [`MAX_CARD`].
//!
//! [`interventional_truth`] reads the mechanism tables directly (truncated
//! factorization with `C -> X` cut). [`frontdoor_estimate`] uses only
//! observational quantities derived from the joint. Agreement of the two is
//! the identity this module exists to check.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CARD: usize = 8;

/// Tolerance on every probability row sum.
pub const ROW_TOL: f64 = 1e-12;

/// Gap above which the front-door estimate is considered wrong.
pub const IDENTITY_TOL: f64 = 1e-10;

/// A probability vector over the values of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_row(&probs, "distribution")?;
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn linf_distance(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        check_row(&self.0, "distribution").is_ok()
    }
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidScm(format!("{what}: empty row")));
    }
    if let Some(v) = row
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
    {
        return Err(Error::InvalidScm(format!(
            "{what}: entry {v} outside [0, 1]"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidScm(format!(
            "{what}: row sums to {sum:.17}, not 1"
        )));
    }
    Ok(())
}

/// Raw tables as they appear in a model file. Cardinalities are inferred.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmTables {
    pub p_c: Vec<f64>,
    pub p_x_given_c: Vec<Vec<f64>>,
    pub p_s_given_x: Vec<Vec<f64>>,
    pub p_y_given_s_c: Vec<Vec<Vec<f64>>>,
}

/// Discrete SCM over `(C, X, S, Y)` with the front-door graph.
///
/// Tables are indexed `p_x_given_c[c][x]`, `p_s_given_x[x][s]` and
/// `p_y_given_s_c[s][c][y]`. There is no table through which `C` could
/// reach `S`, nor any `X -> Y` edge, so the graph is enforced by shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScmTables", into = "ScmTables")]
pub struct DiscreteScm {
    card_c: usize,
    card_x: usize,
    card_s: usize,
    card_y: usize,
    p_c: Vec<f64>,
    p_x_given_c: Vec<Vec<f64>>,
    p_s_given_x: Vec<Vec<f64>>,
    p_y_given_s_c: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<ScmTables> for DiscreteScm {
    type Error = Error;

    fn try_from(t: ScmTables) -> Result<Self> {
        DiscreteScm::new(t.p_c, t.p_x_given_c, t.p_s_given_x, t.p_y_given_s_c)
    }
}

impl From<DiscreteScm> for ScmTables {
    fn from(m: DiscreteScm) -> Self {
        ScmTables {
            p_c: m.p_c,
            p_x_given_c: m.p_x_given_c,
            p_s_given_x: m.p_s_given_x,
            p_y_given_s_c: m.p_y_given_s_c,
        }
    }
}

fn check_card(name: &str, n: usize) -> Result<()> {
    if n == 0 || n > MAX_CARD {
        return Err(Error::InvalidScm(format!(
            "cardinality of {name} is {n}; must be in 1..={MAX_CARD}"
        )));
    }
    Ok(())
}

impl DiscreteScm {
    pub fn new(
        p_c: Vec<f64>,
        p_x_given_c: Vec<Vec<f64>>,
        p_s_given_x: Vec<Vec<f64>>,
        p_y_given_s_c: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let card_c = p_c.len();
        let card_x = p_x_given_c.first().map_or(0, Vec::len);
        let card_s = p_s_given_x.first().map_or(0, Vec::len);
        let card_y = p_y_given_s_c
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        check_card("C", card_c)?;
        check_card("X", card_x)?;
        check_card("S", card_s)?;
        check_card("Y", card_y)?;

        check_row(&p_c, "p_c")?;
        if p_x_given_c.len() != card_c {
            return Err(Error::InvalidScm(format!(
                "p_x_given_c has {} rows, expected card(C) = {card_c}",
                p_x_given_c.len()
            )));
        }
        for (c, row) in p_x_given_c.iter().enumerate() {
            if row.len() != card_x {
                return Err(Error::InvalidScm(format!("p_x_given_c[{c}] is ragged")));
            }
            check_row(row, &format!("p_x_given_c[{c}]"))?;
        }
        if p_s_given_x.len() != card_x {
            return Err(Error::InvalidScm(format!(
                "p_s_given_x has {} rows, expected card(X) = {card_x}",
                p_s_given_x.len()
            )));
        }
        for (x, row) in p_s_given_x.iter().enumerate() {
            if row.len() != card_s {
                return Err(Error::InvalidScm(format!("p_s_given_x[{x}] is ragged")));
            }
            check_row(row, &format!("p_s_given_x[{x}]"))?;
        }
        if p_y_given_s_c.len() != card_s {
            return Err(Error::InvalidScm(format!(
                "p_y_given_s_c has {} blocks, expected card(S) = {card_s}",
                p_y_given_s_c.len()
            )));
        }
        for (s, block) in p_y_given_s_c.iter().enumerate() {
            if block.len() != card_c {
                return Err(Error::InvalidScm(format!(
                    "p_y_given_s_c[{s}] has {} rows, expected card(C) = {card_c}",
                    block.len()
                )));
            }
            for (c, row) in block.iter().enumerate() {
                if row.len() != card_y {
                    return Err(Error::InvalidScm(format!(
                        "p_y_given_s_c[{s}][{c}] is ragged"
                    )));
                }
                check_row(row, &format!("p_y_given_s_c[{s}][{c}]"))?;
            }
        }

        Ok(Self {
            card_c,
            card_x,
            card_s,
            card_y,
            p_c,
            p_x_given_c,
            p_s_given_x,
            p_y_given_s_c,
        })
    }

    /// Random strictly positive model; each row is a normalized vector of
    /// uniform draws bounded away from zero. Cardinalities are drawn from
    /// `2..=max_card`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_card: usize) -> Result<Self> {
        check_card("max_card", max_card)?;
        let card = |rng: &mut R| {
            if max_card < 2 {
                1
            } else {
                rng.gen_range(2..=max_card)
            }
        };
        let (cc, cx, cs, cy) = (card(rng), card(rng), card(rng), card(rng));
        let row = |rng: &mut R, n: usize| {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect::<Vec<f64>>()
        };
        let p_c = row(rng, cc);
        let p_x_given_c = (0..cc).map(|_| row(rng, cx)).collect();
        let p_s_given_x = (0..cx).map(|_| row(rng, cs)).collect();
        let p_y_given_s_c = (0..cs)
            .map(|_| (0..cc).map(|_| row(rng, cy)).collect())
            .collect();
        Self::new(p_c, p_x_given_c, p_s_given_x, p_y_given_s_c)
    }

    /// Every table uniform, all variables binary.
    pub fn uniform_binary() -> Self {
        let h = vec![0.5, 0.5];
        Self::new(
            h.clone(),
            vec![h.clone(); 2],
            vec![h.clone(); 2],
            vec![vec![h.clone(); 2]; 2],
        )
        .expect("uniform tables are valid")
    }

    /// `C = 0` surely, `X = C`, `S = X`, `Y = S`.
    pub fn deterministic_chain() -> Self {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        Self::new(
            vec![1.0, 0.0],
            id.clone(),
            id.clone(),
            vec![vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 2]],
        )
        .expect("chain tables are valid")
    }

    /// Binary model where `C` drives both `X` and `Y` strongly, so the
    /// observational and interventional distributions of `Y` disagree.
    pub fn confounded_example() -> Self {
        Self::new(
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![vec![0.8, 0.2], vec![0.2, 0.8]],
            vec![
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                vec![vec![0.8, 0.2], vec![0.1, 0.9]],
            ],
        )
        .expect("confounded tables are valid")
    }

    pub fn card_c(&self) -> usize {
        self.card_c
    }
    pub fn card_x(&self) -> usize {
        self.card_x
    }
    pub fn card_s(&self) -> usize {
        self.card_s
    }
    pub fn card_y(&self) -> usize {
        self.card_y
    }
    pub fn p_c(&self) -> &[f64] {
        &self.p_c
    }
    pub fn p_x_given_c(&self) -> &[Vec<f64>] {
        &self.p_x_given_c
    }
    pub fn p_s_given_x(&self) -> &[Vec<f64>] {
        &self.p_s_given_x
    }
    pub fn p_y_given_s_c(&self) -> &[Vec<Vec<f64>>] {
        &self.p_y_given_s_c
    }

    pub fn tables(&self) -> ScmTables {
        self.clone().into()
    }

    /// Positivity conditions under which the front-door estimate needs no
    /// degenerate-conditional substitution. Returned as human-readable
    /// findings; an empty list means the model is positive.
    pub fn positivity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let px = marginal_x(&joint(self));
        for (x, p) in px.iter().enumerate() {
            if *p <= 0.0 {
                out.push(format!("P(X={x}) = 0"));
            }
        }
        for (x, row) in self.p_s_given_x.iter().enumerate() {
            for (s, p) in row.iter().enumerate() {
                if *p <= 0.0 {
                    out.push(format!("P(S={s} | X={x}) = 0"));
                }
            }
        }
        out
    }

    pub fn is_positive(&self) -> bool {
        self.positivity_violations().is_empty()
    }

    fn check_x(&self, x: usize) -> Result<()> {
        if x >= self.card_x {
            return Err(Error::InvalidParameter(format!(
                "x = {x} out of range for card(X) = {}",
                self.card_x
            )));
        }
        Ok(())
    }

    fn check_s(&self, s: usize) -> Result<()> {
        if s >= self.card_s {
            return Err(Error::InvalidParameter(format!(
                "s = {s} out of range for card(S) = {}",
                self.card_s
            )));
        }
        Ok(())
    }
}

/// Dense joint table `P(c, x, s, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl JointTable {
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    fn index(&self, c: usize, x: usize, s: usize, y: usize) -> usize {
        let [_, dx, ds, dy] = self.dims;
        ((c * dx + x) * ds + s) * dy + y
    }

    pub fn get(&self, c: usize, x: usize, s: usize, y: usize) -> f64 {
        self.data[self.index(c, x, s, y)]
    }

    pub fn total_mass(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Product of the four factors over every cell.
pub fn joint(scm: &DiscreteScm) -> JointTable {
    let dims = [scm.card_c, scm.card_x, scm.card_s, scm.card_y];
    let mut data = Vec::with_capacity(dims.iter().product());
    for c in 0..scm.card_c {
        for x in 0..scm.card_x {
            for s in 0..scm.card_s {
                for y in 0..scm.card_y {
                    data.push(
                        scm.p_c[c]
                            * scm.p_x_given_c[c][x]
                            * scm.p_s_given_x[x][s]
                            * scm.p_y_given_s_c[s][c][y],
                    );
                }
            }
        }
    }
    JointTable { dims, data }
}

fn marginal_x(j: &JointTable) -> Vec<f64> {
    let [dc, dx, ds, dy] = j.dims;
    let mut px = vec![0.0; dx];
    for c in 0..dc {
        for (x, p) in px.iter_mut().enumerate() {
            for s in 0..ds {
                for y in 0..dy {
                    *p += j.get(c, x, s, y);
                }
            }
        }
    }
    px
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
    v
}

/// `P(Y | X = x)` from the joint, i.e. `sum_c P(Y | x, c) P(c | x)`.
pub fn observational(scm: &DiscreteScm, x: usize) -> Result<Distribution> {
    scm.check_x(x)?;
    let j = joint(scm);
    let [dc, _, ds, dy] = j.dims;
    let mut py = vec![0.0; dy];
    for c in 0..dc {
        for s in 0..ds {
            for (y, p) in py.iter_mut().enumerate() {
                *p += j.get(c, x, s, y);
            }
        }
    }
    if py.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence { value: x });
    }
    Ok(Distribution(normalize(py)))
}

/// Ground truth `P(Y | do(X = x))` from the mechanism tables:
/// `sum_s P(s | x) sum_c P(c) P(Y | s, c)`.
pub fn interventional_truth(scm: &DiscreteScm, x: usize) -> Result<Distribution> {
    scm.check_x(x)?;
    let mut py = vec![0.0; scm.card_y];
    for s in 0..scm.card_s {
        let ps = scm.p_s_given_x[x][s];
        for c in 0..scm.card_c {
            let w = ps * scm.p_c[c];
            for (y, p) in py.iter_mut().enumerate() {
                *p += w * scm.p_y_given_s_c[s][c][y];
            }
        }
    }
    Ok(Distribution(py))
}

/// `P(S | do(X = x))`, which equals the conditional row `P(S | X = x)`
/// because nothing opens a back-door path from `X` into `S`.
pub fn mediator_intervention(scm: &DiscreteScm, x: usize) -> Result<Distribution> {
    scm.check_x(x)?;
    Ok(Distribution(scm.p_s_given_x[x].clone()))
}

/// Observational conditionals needed by the adjustment formulas.
struct ObservedConditionals {
    px: Vec<f64>,
    /// `P(s | x)` as `[x][s]`.
    ps_given_x: Vec<Vec<f64>>,
    /// `P(y | s, x)` as `[s][x][y]`; uniform where `P(s, x) = 0`.
    py_given_sx: Vec<Vec<Vec<f64>>>,
}

fn observed_conditionals(scm: &DiscreteScm) -> ObservedConditionals {
    let j = joint(scm);
    let [dc, dx, ds, dy] = j.dims;
    let mut psx = vec![vec![0.0; ds]; dx];
    let mut pysx = vec![vec![vec![0.0; dy]; dx]; ds];
    for c in 0..dc {
        for x in 0..dx {
            for s in 0..ds {
                for y in 0..dy {
                    let v = j.get(c, x, s, y);
                    psx[x][s] += v;
                    pysx[s][x][y] += v;
                }
            }
        }
    }
    let px: Vec<f64> = psx.iter().map(|r| r.iter().sum()).collect();
    let ps_given_x = psx
        .iter()
        .zip(&px)
        .map(|(row, &p)| {
            if p > 0.0 {
                row.iter().map(|v| v / p).collect()
            } else {
                vec![0.0; ds]
            }
        })
        .collect();
    let py_given_sx = pysx
        .into_iter()
        .enumerate()
        .map(|(s, by_x)| {
            by_x.into_iter()
                .enumerate()
                .map(|(x, ys)| {
                    if psx[x][s] > 0.0 {
                        normalize(ys)
                    } else {
                        vec![1.0 / dy as f64; dy]
                    }
                })
                .collect()
        })
        .collect();
    ObservedConditionals {
        px,
        ps_given_x,
        py_given_sx,
    }
}

fn outcome_from(obs: &ObservedConditionals, s: usize, card_y: usize) -> Vec<f64> {
    let mut py = vec![0.0; card_y];
    for (x, &px) in obs.px.iter().enumerate() {
        for (y, p) in py.iter_mut().enumerate() {
            *p += obs.py_given_sx[s][x][y] * px;
        }
    }
    py
}

/// `P(Y | do(S = s)) = sum_x' P(Y | S = s, X = x') P(x')`.
///
/// `P(Y | s, x')` is replaced by the uniform distribution wherever
/// `P(s, x') = 0`.
pub fn outcome_intervention(scm: &DiscreteScm, s: usize) -> Result<Distribution> {
    scm.check_s(s)?;
    let obs = observed_conditionals(scm);
    Ok(Distribution(outcome_from(&obs, s, scm.card_y)))
}

/// Front-door adjustment computed from observational quantities only:
/// `sum_s P(s | x) sum_x' P(Y | x', s) P(x')`.
pub fn frontdoor_estimate(scm: &DiscreteScm, x: usize) -> Result<Distribution> {
    scm.check_x(x)?;
    let obs = observed_conditionals(scm);
    if obs.px[x] <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence { value: x });
    }
    let mut py = vec![0.0; scm.card_y];
    for s in 0..scm.card_s {
        let ps = obs.ps_given_x[x][s];
        if ps == 0.0 {
            continue;
        }
        for (p, v) in py.iter_mut().zip(outcome_from(&obs, s, scm.card_y)) {
            *p += ps * v;
        }
    }
    Ok(Distribution(py))
}

/// Largest L-infinity gap between front-door and ground truth over all
/// values of `X` with positive probability.
pub fn max_identity_gap(scm: &DiscreteScm) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for x in 0..scm.card_x {
        let truth = interventional_truth(scm, x)?;
        match frontdoor_estimate(scm, x) {
            Ok(est) => gap = gap.max(est.linf_distance(&truth)),
            Err(Error::ZeroProbabilityEvidence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrial {
    pub cards: [usize; 4],
    pub max_gap: f64,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub trials: Vec<OracleTrial>,
    pub max_gap: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.max_gap < self.tolerance)
    }
}

/// Check the front-door identity on `trials` seeded random positive models.
pub fn run_oracle(seed: u64, trials: usize, max_card: usize) -> Result<OracleReport> {
    let mut rng = crate::rng::seeded(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let scm = DiscreteScm::random(&mut rng, max_card)?;
        out.push(OracleTrial {
            cards: [scm.card_c, scm.card_x, scm.card_s, scm.card_y],
            max_gap: max_identity_gap(&scm)?,
        });
    }
    let max_gap = out.iter().map(|t| t.max_gap).fold(0.0, f64::max);
    Ok(OracleReport {
        trials: out,
        max_gap,
        tolerance: IDENTITY_TOL,
    })
}

pub fn load_scm(path: &std::path::Path) -> Result<DiscreteScm> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str::<DiscreteScm>(&text).map_err(|e| Error::InvalidScm(e.to_string()))
}

pub fn save_scm(scm: &DiscreteScm, path: &std::path::Path) -> Result<()> {
    let text = toml::to_string(&scm.tables()).map_err(|e| Error::InvalidScm(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
