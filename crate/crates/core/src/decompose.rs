//! Decomposition of an `(ε, δ)`-indistinguishable pair into error systems
//! `E^0, E^1` carrying mass `δ` and a pure pair `N'^0, N'^1`, such that for
//! every adversary and `p = e^ε / (1 + e^ε)`
//!
//! `IT(A : M^b) = δ·IT(A : E^b) + (1-δ)·(p·IT(A : N'^b) + (1-p)·IT(A : N'^{1-b}))`.
//!
//! All quantities are handled through history products
//! `M(h) = ∏ Pr[M(h_{<i}, x_i) = y_i]`; a deterministic adversary only
//! multiplies these by an indicator, so identities between products are
//! identities between transcript laws.

use std::collections::HashMap;

use crate::adversary::Adversary;
use crate::engine::{transcript_distribution, TranscriptDistribution};
use crate::error::{Error, Result};
use crate::system::{InteractiveSystem, Path, Step, SubMeasureSystem, SystemPair};
use crate::EQ_TOL;

/// `ε` used in place of zero, where the construction needs `e^{-ε} < 1`.
pub const ZERO_EPS_FALLBACK: f64 = 1e-9;

/// The histories reachable under at least one of several systems that share
/// spaces and horizon, with their products.
#[derive(Clone, Debug)]
pub struct Universe {
    horizon: usize,
    queries: usize,
    responses: usize,
    levels: Vec<Vec<Path>>,
    mass: HashMap<Path, Vec<f64>>,
    options: HashMap<Path, Vec<usize>>,
}

impl Universe {
    pub fn build(systems: &[&InteractiveSystem]) -> Result<Self> {
        let first = systems[0];
        let (horizon, nq, ny) = (first.horizon(), first.queries().len(), first.responses().len());
        let mut levels = vec![vec![Vec::new()]];
        let mut mass = HashMap::new();
        let mut options = HashMap::new();
        mass.insert(Vec::new(), vec![1.0; systems.len()]);
        for t in 0..horizon {
            let mut next = Vec::new();
            for h in &levels[t] {
                let here: Vec<f64> = mass[h].clone();
                let mut xs = Vec::new();
                for x in 0..nq {
                    let live: Vec<bool> = systems
                        .iter()
                        .zip(&here)
                        .filter(|(_, &m)| m > 0.0)
                        .map(|(s, _)| s.admits(h, x))
                        .collect();
                    if live.iter().all(|&a| !a) {
                        continue;
                    }
                    if live.iter().any(|&a| !a) {
                        return Err(Error::Mismatch(format!(
                            "query {} admitted by only some systems at {}",
                            first.queries().label(x),
                            first.render_path(h)
                        )));
                    }
                    xs.push(x);
                    for y in 0..ny {
                        let child_mass: Vec<f64> = systems
                            .iter()
                            .zip(&here)
                            .map(|(s, &m)| if m > 0.0 { m * s.row(h, x).map_or(0.0, |r| r[y]) } else { 0.0 })
                            .collect();
                        if child_mass.iter().any(|&m| m > 0.0) {
                            let mut c = h.clone();
                            c.push((x, y));
                            mass.insert(c.clone(), child_mass);
                            next.push(c);
                        }
                    }
                }
                options.insert(h.clone(), xs);
            }
            levels.push(next);
        }
        Ok(Universe {
            horizon,
            queries: nq,
            responses: ny,
            levels,
            mass,
            options,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Histories of length `t`, in a fixed order.
    pub fn level(&self, t: usize) -> &[Path] {
        &self.levels[t]
    }

    /// Full-length histories.
    pub fn leaves(&self) -> &[Path] {
        &self.levels[self.horizon]
    }

    pub fn mass(&self, path: &[Step]) -> Option<&[f64]> {
        self.mass.get(path).map(Vec::as_slice)
    }

    pub fn options(&self, path: &[Step]) -> &[usize] {
        self.options.get(path).map_or(&[], Vec::as_slice)
    }

    fn children(&self, h: &[Step], x: usize) -> impl Iterator<Item = Path> + '_ {
        let h = h.to_vec();
        (0..self.responses).filter_map(move |y| {
            let mut c = h.clone();
            c.push((x, y));
            self.mass.contains_key(&c).then_some(c)
        })
    }

    fn admits(&self, path: &[Step], x: usize) -> bool {
        match self.options.get(path) {
            Some(xs) => xs.contains(&x),
            None => path.len() < self.horizon && x < self.queries,
        }
    }

    /// A system whose products are `value` on this universe. Rows are the
    /// ratios of consecutive products, normalized over the children; they
    /// are uniform where the history has zero value.
    pub fn system_from_products(&self, template: &InteractiveSystem, value: impl Fn(&[Step]) -> f64) -> Result<InteractiveSystem> {
        let ny = self.responses;
        InteractiveSystem::from_fn(template.queries().clone(), template.responses().clone(), self.horizon, |path, x| {
            if !self.admits(path, x) {
                return None;
            }
            let mut child: Path = path.to_vec();
            child.push((x, 0));
            let mut row = Vec::with_capacity(ny);
            for y in 0..ny {
                child.last_mut().expect("nonempty").1 = y;
                row.push(if self.mass.contains_key(&child) { value(&child).max(0.0) } else { 0.0 });
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|p| *p /= total);
            } else {
                row = vec![1.0 / ny as f64; ny];
            }
            Some(row)
        })
    }
}

/// The control functions `Lower` and `Upper` of an ordered pair.
#[derive(Clone, Debug)]
pub struct ControlTables {
    pub epsilon: f64,
    universe: Universe,
    /// `Lower^b(h, x)`.
    lower: HashMap<(Path, usize), [f64; 2]>,
    /// `max_x Lower^b(h, x)` below the horizon; the clipped difference
    /// `max(M^b - e^ε M^{1-b}, 0)` at full length.
    floor: HashMap<Path, [f64; 2]>,
}

impl ControlTables {
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn lower(&self, history: &[Step], query: usize, b: usize) -> f64 {
        self.lower.get(&(history.to_vec(), query)).map_or(0.0, |v| v[b])
    }

    /// `M^b(h) - e^{-ε} M^{1-b}(h)`.
    pub fn upper(&self, history: &[Step], b: usize) -> f64 {
        match self.universe.mass(history) {
            Some(m) => m[b] - (-self.epsilon).exp() * m[1 - b],
            None => 0.0,
        }
    }

    /// The lower bound on `δ·E^b(h)` the construction must respect.
    pub fn floor(&self, history: &[Step], b: usize) -> f64 {
        self.floor.get(history).map_or(0.0, |v| v[b])
    }

    /// `max_{b, x} Lower^b(∅, x)`: the worst-case hockey-stick divergence of
    /// the pair at `ε`, attained by the adversary that follows the maximizing
    /// queries.
    pub fn start_level(&self) -> f64 {
        self.universe
            .options(&[])
            .iter()
            .flat_map(|&x| [self.lower(&[], x, 0), self.lower(&[], x, 1)])
            .fold(0.0, f64::max)
    }

    /// Checks `Lower^b(∅, x) ≤ δ` for every `b` and first query `x`.
    pub fn check_start(&self, delta: f64) -> Result<()> {
        for &x in self.universe.options(&[]) {
            for b in 0..2 {
                let l = self.lower(&[], x, b);
                if l > delta + EQ_TOL {
                    return Err(Error::construction(
                        "control tables",
                        format!(
                            "Lower^{b}(∅, {}) = {l} exceeds δ = {delta}; the pair is not indistinguishable at this level",
                            x
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Backward recursion for `Lower`, checking at every node that
/// `Lower^b(h, x) ≤ Upper^b(h) + e^{-ε} Lower^{1-b}(h, x)`.
pub fn control_tables(pair: &SystemPair, epsilon: f64) -> Result<ControlTables> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must be finite and nonnegative")));
    }
    let universe = Universe::build(&[&pair.m0, &pair.m1])?;
    let (up, down) = (epsilon.exp(), (-epsilon).exp());
    let mut floor: HashMap<Path, [f64; 2]> = HashMap::new();
    let mut lower: HashMap<(Path, usize), [f64; 2]> = HashMap::new();
    for h in universe.leaves() {
        let m = universe.mass(h).expect("leaf in universe");
        floor.insert(h.clone(), [(m[0] - up * m[1]).max(0.0), (m[1] - up * m[0]).max(0.0)]);
    }
    let mut tables = ControlTables {
        epsilon,
        universe,
        lower: HashMap::new(),
        floor: HashMap::new(),
    };
    for t in (0..tables.universe.horizon()).rev() {
        for h in tables.universe.level(t) {
            let mut best = [0.0f64; 2];
            for &x in tables.universe.options(h) {
                let mut l = [0.0; 2];
                for c in tables.universe.children(h, x) {
                    let f = floor[&c];
                    l[0] += f[0];
                    l[1] += f[1];
                }
                for b in 0..2 {
                    let m = tables.universe.mass(h).expect("history in universe");
                    let upper = m[b] - down * m[1 - b];
                    if l[b] > upper + down * l[1 - b] + EQ_TOL {
                        return Err(Error::construction(
                            "control tables",
                            format!(
                                "Lower^{b} exceeds Upper^{b} + e^-ε Lower^{} at {} query {}",
                                1 - b,
                                pair.m0.render_path(h),
                                pair.m0.queries().label(x)
                            ),
                        ));
                    }
                    best[b] = best[b].max(l[b]);
                }
                lower.insert((h.clone(), x), l);
            }
            floor.insert(h.clone(), best);
        }
    }
    tables.lower = lower;
    tables.floor = floor;
    Ok(tables)
}

/// Greatest `(u, v)` with `u ≤ a`, `v ≤ b`, `u ≤ U0 + c·v`, `v ≤ U1 + c·u`.
/// The constraint set is closed under componentwise maximum, so this is the
/// point where raising both coordinates hits one of the stop events.
fn greatest_feasible(a: f64, b: f64, upper: [f64; 2], c: f64) -> (f64, f64) {
    let det = 1.0 - c * c;
    let u_star = (upper[0] + c * upper[1]) / det;
    let v_star = (upper[1] + c * upper[0]) / det;
    let u = a.min(upper[0] + c * b).min(u_star);
    let v = b.min(upper[1] + c * a).min(v_star);
    (u, v)
}

/// Error systems of a pair together with the seeded values before the gap
/// adjustment.
#[derive(Clone, Debug)]
pub struct ErrorSystems {
    pub e0: InteractiveSystem,
    pub e1: InteractiveSystem,
    /// Rows `Ẽ^b(child) / E^b(parent)` before any gap was closed.
    pub seeds: [SubMeasureSystem; 2],
    /// `δ·E^b(h)` on the universe.
    scaled: HashMap<Path, [f64; 2]>,
    pub tables: ControlTables,
    pub epsilon: f64,
    pub delta: f64,
}

impl ErrorSystems {
    pub fn get(&self, b: usize) -> &InteractiveSystem {
        if b == 0 {
            &self.e0
        } else {
            &self.e1
        }
    }

    /// `δ·E^b(h)` as constructed.
    pub fn scaled_mass(&self, history: &[Step], b: usize) -> f64 {
        self.scaled.get(history).map_or(0.0, |v| v[b])
    }

    /// Largest violation of `δE^b ≥ floor^b` and `δE^b ≤ Upper^b + e^{-ε}δE^{1-b}`
    /// over all histories.
    pub fn requirement_violation(&self) -> f64 {
        let c = (-self.epsilon).exp();
        let mut worst: f64 = 0.0;
        for (h, f) in &self.scaled {
            for b in 0..2 {
                worst = worst.max(self.tables.floor(h, b) - f[b]);
                worst = worst.max(f[b] - self.tables.upper(h, b) - c * f[1 - b]);
            }
        }
        worst
    }
}

/// Constructs `E^0, E^1` forward in depth, seeding each child at its floor
/// and closing the parent's mass gap in a fixed response order.
pub fn build_error_systems(pair: &SystemPair, epsilon: f64, delta: f64) -> Result<ErrorSystems> {
    crate::divergence::check_eps_delta(epsilon, delta)?;
    let eps = if epsilon < ZERO_EPS_FALLBACK { ZERO_EPS_FALLBACK } else { epsilon };
    let tables = control_tables(pair, eps)?;
    tables.check_start(delta)?;
    let c = (-eps).exp();
    let u = &tables.universe;
    let mut scaled: HashMap<Path, [f64; 2]> = HashMap::new();
    let mut seed_mass: HashMap<Path, [f64; 2]> = HashMap::new();
    scaled.insert(Vec::new(), [delta, delta]);
    for t in 0..u.horizon() {
        for h in u.level(t) {
            let parent = scaled[h];
            for &x in u.options(h) {
                let children: Vec<Path> = u.children(h, x).collect();
                let mut gap = parent;
                let mut vals: Vec<[f64; 2]> = Vec::with_capacity(children.len());
                for ch in &children {
                    let s = [tables.floor(ch, 0), tables.floor(ch, 1)];
                    gap[0] -= s[0];
                    gap[1] -= s[1];
                    vals.push(s);
                    seed_mass.insert(ch.clone(), s);
                }
                if gap[0] < -EQ_TOL || gap[1] < -EQ_TOL {
                    return Err(Error::construction(
                        "error systems",
                        format!("seeds exceed parent mass at {}", pair.m0.render_path(h)),
                    ));
                }
                gap = [gap[0].max(0.0), gap[1].max(0.0)];
                for (ch, v) in children.iter().zip(vals.iter_mut()) {
                    let upper = [tables.upper(ch, 0), tables.upper(ch, 1)];
                    let (nu, nv) = greatest_feasible(v[0] + gap[0], v[1] + gap[1], upper, c);
                    let (nu, nv) = (nu.max(v[0]), nv.max(v[1]));
                    gap[0] = (gap[0] - (nu - v[0])).max(0.0);
                    gap[1] = (gap[1] - (nv - v[1])).max(0.0);
                    *v = [nu, nv];
                }
                if gap[0] > EQ_TOL || gap[1] > EQ_TOL {
                    return Err(Error::construction(
                        "error systems",
                        format!(
                            "residual gap ({}, {}) at {} query {}",
                            gap[0],
                            gap[1],
                            pair.m0.render_path(h),
                            pair.m0.queries().label(x)
                        ),
                    ));
                }
                for (ch, v) in children.into_iter().zip(vals) {
                    scaled.insert(ch, v);
                }
            }
        }
    }
    let value = |b: usize| {
        let scaled = &scaled;
        move |p: &[Step]| scaled.get(p).map_or(0.0, |v| v[b])
    };
    let (e0, e1) = if delta > 0.0 {
        (
            u.system_from_products(&pair.m0, value(0))?,
            u.system_from_products(&pair.m0, value(1))?,
        )
    } else {
        let zero = |_: &[Step]| 0.0;
        (u.system_from_products(&pair.m0, zero)?, u.system_from_products(&pair.m0, zero)?)
    };
    let seeds = [seed_system(u, &pair.m0, &scaled, &seed_mass, 0)?, seed_system(u, &pair.m0, &scaled, &seed_mass, 1)?];
    Ok(ErrorSystems {
        e0,
        e1,
        seeds,
        scaled,
        tables,
        epsilon: eps,
        delta,
    })
}

fn seed_system(
    u: &Universe,
    template: &InteractiveSystem,
    scaled: &HashMap<Path, [f64; 2]>,
    seeds: &HashMap<Path, [f64; 2]>,
    b: usize,
) -> Result<SubMeasureSystem> {
    let ny = template.responses().len();
    let mut nodes = HashMap::new();
    for t in 0..u.horizon() {
        for h in u.level(t) {
            let parent = scaled[h][b];
            let rows = (0..template.queries().len())
                .map(|x| {
                    u.options(h).contains(&x).then(|| {
                        (0..ny)
                            .map(|y| {
                                let mut c = h.clone();
                                c.push((x, y));
                                match seeds.get(&c) {
                                    Some(s) if parent > 0.0 => s[b] / parent,
                                    _ => 0.0,
                                }
                            })
                            .collect()
                    })
                })
                .collect();
            nodes.insert(h.clone(), crate::system::Node { rows });
        }
    }
    Ok(SubMeasureSystem::new(InteractiveSystem::from_nodes(
        template.queries().clone(),
        template.responses().clone(),
        u.horizon(),
        nodes,
    )?))
}

/// `N = (M - δE) / (1 - δ)` as a system.
pub fn subtract_system(m: &InteractiveSystem, e: &InteractiveSystem, delta: f64) -> Result<InteractiveSystem> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must lie in [0, 1)")));
    }
    if delta == 0.0 {
        return Ok(m.clone());
    }
    let u = Universe::build(&[m, e])?;
    for leaf in u.leaves() {
        let v = u.mass(leaf).expect("leaf");
        if v[0] - delta * v[1] < -EQ_TOL {
            return Err(Error::construction(
                "subtract",
                format!("M < δE on transcript {}", m.render_path(leaf)),
            ));
        }
    }
    u.system_from_products(m, |p| {
        let v = u.mass(p).expect("in universe");
        ((v[0] - delta * v[1]) / (1.0 - delta)).max(0.0)
    })
}

/// Splits a pure `(ε, 0)` pair into `N'^0, N'^1` with
/// `N^b = p·N'^b + (1-p)·N'^{1-b}`, `p = e^ε / (1 + e^ε)`.
///
/// Pointwise on products: `N'^b = ½[(N^b + N^{1-b}) + K(N^b - N^{1-b})]` with
/// `K = (e^ε + 1)/(e^ε - 1)`. Nonnegativity is exactly the ratio condition.
/// For `e^ε - 1 < 1e-6` the factor `K` would amplify rounding beyond the
/// equality tolerance; there the members must agree and are returned as is.
pub fn pure_split(pair: &SystemPair, epsilon: f64) -> Result<SystemPair> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must be finite and nonnegative")));
    }
    let u = Universe::build(&[&pair.m0, &pair.m1])?;
    let up = epsilon.exp();
    for leaf in u.leaves() {
        let v = u.mass(leaf).expect("leaf");
        for b in 0..2 {
            if v[b] - up * v[1 - b] > EQ_TOL {
                return Err(Error::construction(
                    "pure split",
                    format!(
                        "N^{b}/N^{} exceeds e^ε on transcript {}",
                        1 - b,
                        pair.m0.render_path(leaf)
                    ),
                ));
            }
        }
    }
    if up - 1.0 < 1e-6 {
        return Ok(pair.clone());
    }
    let k = (up + 1.0) / (up - 1.0);
    let split = |b: usize| {
        let u = &u;
        move |p: &[Step]| {
            let v = u.mass(p).expect("in universe");
            0.5 * ((v[b] + v[1 - b]) + k * (v[b] - v[1 - b]))
        }
    };
    SystemPair::new(
        u.system_from_products(&pair.m0, split(0))?,
        u.system_from_products(&pair.m0, split(1))?,
    )
}

/// `(E^0, E^1, N'^0, N'^1)` with the parameters they were built for.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub epsilon: f64,
    pub delta: f64,
    pub error: SystemPair,
    pub pure: SystemPair,
    /// The decomposed pair, when known.
    pub source: Option<SystemPair>,
}

impl Decomposition {
    /// Branch weights `(δ, (1-δ)p, (1-δ)(1-p))` for `(E^b, N'^b, N'^{1-b})`.
    pub fn weights(&self) -> [f64; 3] {
        let p = self.epsilon.exp() / (1.0 + self.epsilon.exp());
        [self.delta, (1.0 - self.delta) * p, (1.0 - self.delta) * (1.0 - p)]
    }

    /// The system selected by a branch for input `b`.
    pub fn branch(&self, branch: usize, b: usize) -> &InteractiveSystem {
        match branch {
            0 => self.error.get(b),
            1 => self.pure.get(b),
            _ => self.pure.get(1 - b),
        }
    }

    /// Per-transcript mixture identity against `adversary`:
    /// the largest gap between `IT(A : M^b)` and the recombined law.
    pub fn identity_gap(&self, adversary: &Adversary) -> Result<f64> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("decomposition has no source pair".into()))?;
        let mut worst: f64 = 0.0;
        for b in 0..2 {
            let direct = transcript_distribution(adversary, &[source.get(b)])?;
            let mixed = simulate_via_rr(&[self], adversary, b)?;
            worst = worst.max(direct.max_gap(&mixed));
        }
        Ok(worst)
    }
}

/// Full pipeline: error systems, subtraction, purity check, pure split.
pub fn decompose(pair: &SystemPair, epsilon: f64, delta: f64) -> Result<Decomposition> {
    let errors = build_error_systems(pair, epsilon, delta)?;
    let n0 = subtract_system(&pair.m0, &errors.e0, delta)?;
    let n1 = subtract_system(&pair.m1, &errors.e1, delta)?;
    let n = SystemPair::new(n0, n1)?;
    let pure = pure_split(&n, errors.epsilon)?;
    Ok(Decomposition {
        epsilon: errors.epsilon,
        delta,
        error: SystemPair::new(errors.e0, errors.e1)?,
        pure,
        source: Some(pair.clone()),
    })
}

/// Output law of the simulator that draws, independently per mechanism, one
/// branch of approximate randomized response and then runs the adversary
/// against the selected systems.
pub fn simulate_via_rr(decomps: &[&Decomposition], adversary: &Adversary, b: usize) -> Result<TranscriptDistribution> {
    if b > 1 {
        return Err(Error::InvalidParameter("b must be 0 or 1".into()));
    }
    let k = decomps.len();
    let mut out = TranscriptDistribution::default();
    let mut branch = vec![0usize; k];
    loop {
        let weight: f64 = branch.iter().zip(decomps).map(|(&br, d)| d.weights()[br]).product();
        if weight > 0.0 {
            let systems: Vec<&InteractiveSystem> = branch.iter().zip(decomps).map(|(&br, d)| d.branch(br, b)).collect();
            let law = transcript_distribution(adversary, &systems)?;
            out.add_scaled(&law, weight);
        }
        let Some(i) = (0..k).rev().find(|&i| branch[i] < 2) else {
            break;
        };
        branch[i] += 1;
        branch[i + 1..].iter_mut().for_each(|v| *v = 0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Space;

    fn approx_rr(eps: f64, delta: f64) -> SystemPair {
        let p = eps.exp() / (1.0 + eps.exp());
        let m = |b: usize| {
            let mut row = vec![0.0; 4];
            row[b] = delta;
            row[2 + b] = (1.0 - delta) * p;
            row[2 + (1 - b)] = (1.0 - delta) * (1.0 - p);
            InteractiveSystem::stateless(
                Space::new(["q"]).unwrap(),
                Space::new(["0_top", "1_top", "0_bot", "1_bot"]).unwrap(),
                1,
                vec![row],
            )
            .unwrap()
        };
        SystemPair::new(m(0), m(1)).unwrap()
    }

    #[test]
    fn approximate_rr_error_systems_are_point_masses() {
        let (eps, delta) = (1.0, 0.1);
        let pair = approx_rr(eps, delta);
        let t = control_tables(&pair, eps).unwrap();
        assert!((t.lower(&[], 0, 0) - delta).abs() < 1e-15);
        assert!((t.start_level() - delta).abs() < 1e-15);
        let e = build_error_systems(&pair, eps, delta).unwrap();
        assert!((e.e0.row(&[], 0).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((e.e1.row(&[], 0).unwrap()[1] - 1.0).abs() < 1e-12);
        assert!(e.requirement_violation() < 1e-12);
        let d = decompose(&pair, eps, delta).unwrap();
        // pure part emits b on the ⊥ branch
        assert!((d.pure.m0.row(&[], 0).unwrap()[2] - 1.0).abs() < 1e-9);
        assert!((d.pure.m1.row(&[], 0).unwrap()[3] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn level_below_the_truth_fails_at_the_start() {
        let pair = approx_rr(1.0, 0.1);
        let err = build_error_systems(&pair, 1.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::Construction { stage: "control tables", .. }));
    }

    #[test]
    fn subtracting_itself_or_nothing_is_identity() {
        let pair = approx_rr(0.5, 0.2);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        let n = subtract_system(&pair.m0, &pair.m0, 0.3).unwrap();
        assert!(close(n.row(&[], 0).unwrap(), pair.m0.row(&[], 0).unwrap()));
        let n = subtract_system(&pair.m0, &pair.m1, 0.0).unwrap();
        assert!(close(n.row(&[], 0).unwrap(), pair.m0.row(&[], 0).unwrap()));
    }

    #[test]
    fn pure_rr_splits_into_point_masses() {
        let eps: f64 = 0.7;
        let p = eps.exp() / (1.0 + eps.exp());
        let q = Space::new(["q"]).unwrap();
        let m = |row: Vec<f64>| InteractiveSystem::stateless(q.clone(), Space::numbered(2), 1, vec![row]).unwrap();
        let pair = SystemPair::new(m(vec![p, 1.0 - p]), m(vec![1.0 - p, p])).unwrap();
        let s = pure_split(&pair, eps).unwrap();
        assert!((s.m0.row(&[], 0).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((s.m1.row(&[], 0).unwrap()[1] - 1.0).abs() < 1e-12);
        assert!(pure_split(&pair, eps / 2.0).is_err());
    }
}
