//! Headless streaming experiments: random walks, per-session delivery
//! traces and multi-user server load.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::navdomain::NavigationDomain;
use crate::partition::Partition;

pub const DEFAULT_FPS: usize = 30;

/// Per-tick move probabilities. On a line only left and right are used.
/// Moves that would leave the domain become stays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkPolicy {
    pub p_stay: f64,
    pub p_left: f64,
    pub p_right: f64,
    #[serde(default)]
    pub p_up: f64,
    #[serde(default)]
    pub p_down: f64,
}

impl Default for WalkPolicy {
    fn default() -> Self {
        Self::line(0.4, 0.3, 0.3)
    }
}

impl WalkPolicy {
    pub fn line(p_stay: f64, p_left: f64, p_right: f64) -> Self {
        Self { p_stay, p_left, p_right, p_up: 0.0, p_down: 0.0 }
    }

    fn probabilities(&self) -> [f64; 5] {
        [self.p_stay, self.p_left, self.p_right, self.p_up, self.p_down]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probabilities();
        if p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("walk probabilities must be nonnegative and sum to 1".into()));
        }
        Ok(())
    }
}

fn step(domain: &NavigationDomain, view: usize, policy: &WalkPolicy, rng: &mut impl Rng) -> usize {
    let (rows, cols) = domain.shape.dims();
    let (r, c) = domain.coords(view);
    let mut u: f64 = rng.random();
    let mut choice = 0;
    for (k, p) in policy.probabilities().iter().enumerate() {
        if u < *p {
            choice = k;
            break;
        }
        u -= p;
        choice = k;
    }
    let (nr, nc) = match choice {
        1 if c > 0 => (r, c - 1),
        2 if c + 1 < cols => (r, c + 1),
        3 if r > 0 => (r - 1, c),
        4 if r + 1 < rows => (r + 1, c),
        _ => (r, c),
    };
    domain.index_of(nr, nc)
}

fn walk_with(domain: &NavigationDomain, start: usize, ticks: usize, policy: &WalkPolicy, rng: &mut impl Rng) -> Vec<usize> {
    let mut path = Vec::with_capacity(ticks);
    let mut v = start;
    for t in 0..ticks {
        if t > 0 {
            v = step(domain, v, policy, rng);
        }
        path.push(v);
    }
    path
}

/// View per tick, starting at `start`, one move per tick.
pub fn random_walk(
    domain: &NavigationDomain,
    start: usize,
    ticks: usize,
    policy: &WalkPolicy,
    seed: u64,
) -> Result<Vec<usize>> {
    domain.check_index(start)?;
    policy.validate()?;
    Ok(walk_with(domain, start, ticks, policy, &mut ChaCha8Rng::seed_from_u64(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub tick: usize,
    pub segment: usize,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub path: Vec<usize>,
    pub deliveries: Vec<Delivery>,
    pub rate_per_second: Vec<u64>,
    pub cumulative_bits: Vec<u64>,
    /// Ticks at which the current view's segment had not been delivered.
    pub stalls: usize,
}

impl SessionTrace {
    pub fn total_bits(&self) -> u64 {
        self.deliveries.iter().map(|d| d.bits).sum()
    }

    /// Cumulative bits delivered before `seconds`.
    pub fn cumulative_at(&self, seconds: usize) -> u64 {
        match seconds {
            0 => 0,
            s => self.cumulative_bits.get(s - 1).or(self.cumulative_bits.last()).copied().unwrap_or(0),
        }
    }
}

fn per_second(deliveries: &[Delivery], ticks: usize, fps: usize) -> (Vec<u64>, Vec<u64>) {
    let seconds = ticks.div_ceil(fps);
    let mut rate = vec![0u64; seconds];
    for d in deliveries {
        rate[d.tick / fps] += d.bits;
    }
    let cumulative = rate
        .iter()
        .scan(0u64, |acc, &r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    (rate, cumulative)
}

/// Replays `path` against the partition: every `nt` ticks the client
/// reports its view and receives every segment meeting its navigation ball
/// that it does not hold yet.
pub fn simulate_session(
    partition: &Partition,
    domain: &NavigationDomain,
    path: &[usize],
    nt: usize,
    fps: usize,
) -> Result<SessionTrace> {
    if nt == 0 || fps == 0 {
        return Err(Error::InvalidParameter("N_T and the frame rate must be positive".into()));
    }
    if partition.n_views != domain.len() {
        return Err(Error::InvalidParameter("partition and domain sizes differ".into()));
    }
    let membership = partition.membership();
    let mut held = vec![false; partition.segments.len()];
    let mut deliveries = Vec::new();
    let mut stalls = 0;
    for (tick, &view) in path.iter().enumerate() {
        domain.check_index(view)?;
        if tick % nt == 0 {
            let mut wanted: Vec<usize> =
                domain.navigation_ball(view, nt)?.into_iter().map(|v| membership[v]).collect();
            wanted.sort_unstable();
            wanted.dedup();
            for s in wanted {
                if !std::mem::replace(&mut held[s], true) {
                    deliveries.push(Delivery { tick, segment: s, bits: partition.segments[s].size_bits() });
                }
            }
        }
        if !held[membership[view]] {
            stalls += 1;
        }
    }
    let (rate_per_second, cumulative_bits) = per_second(&deliveries, path.len(), fps);
    Ok(SessionTrace { path: path.to_vec(), deliveries, rate_per_second, cumulative_bits, stalls })
}

fn start_view(domain: &NavigationDomain, rng: &mut impl Rng) -> Result<usize> {
    let dist = WeightedIndex::new(&domain.popularity.weights)
        .map_err(|e| Error::InvalidParameter(format!("popularity cannot be sampled: {e}")))?;
    Ok(dist.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEnsemble {
    pub seed: u64,
    pub paths: Vec<Vec<usize>>,
}

/// `n_paths` walks of `ticks` ticks from popularity-sampled starts.
pub fn walk_ensemble(
    domain: &NavigationDomain,
    n_paths: usize,
    ticks: usize,
    policy: &WalkPolicy,
    seed: u64,
) -> Result<WalkEnsemble> {
    policy.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let start = start_view(domain, &mut master)?;
        let walk_seed: u64 = master.random();
        paths.push(walk_with(domain, start, ticks, policy, &mut ChaCha8Rng::seed_from_u64(walk_seed)));
    }
    Ok(WalkEnsemble { seed, paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRow {
    pub nt: usize,
    pub mean_bits: f64,
}

/// Mean cumulative bits after `horizon_s` seconds over `n_paths` walks, for
/// each navigation period. The same walks are used for every period.
#[allow(clippy::too_many_arguments)]
pub fn average_cumulative(
    partition: &Partition,
    domain: &NavigationDomain,
    n_paths: usize,
    horizon_s: usize,
    nts: &[usize],
    policy: &WalkPolicy,
    seed: u64,
    fps: usize,
) -> Result<Vec<CumulativeRow>> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("at least one path is required".into()));
    }
    let ensemble = walk_ensemble(domain, n_paths, horizon_s * fps, policy, seed)?;
    nts.iter()
        .map(|&nt| {
            let totals = ensemble
                .paths
                .par_iter()
                .map(|p| Ok(simulate_session(partition, domain, p, nt, fps)?.total_bits()))
                .collect::<Result<Vec<u64>>>()?;
            Ok(CumulativeRow { nt, mean_bits: totals.iter().sum::<u64>() as f64 / n_paths as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Partitioned,
    AllIntra,
    JointAll,
}

/// Everything the server could send, under each representation.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingCosts {
    pub partition: Partition,
    /// Intra-coded size of every view.
    pub intra_bits: Vec<u64>,
    /// Size of the single-segment coding of the whole domain.
    pub joint_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiUserConfig {
    /// New users per second.
    pub nnu: usize,
    /// Mean session length in seconds.
    pub t_mean: f64,
    pub duration_s: usize,
    pub nt: usize,
    pub fps: usize,
    pub policy: WalkPolicy,
}

impl MultiUserConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mean > 0.0) || !self.t_mean.is_finite() {
            return Err(Error::InvalidParameter("mean navigation time must be positive".into()));
        }
        if self.nt == 0 || self.fps == 0 {
            return Err(Error::InvalidParameter("N_T and the frame rate must be positive".into()));
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUserReport {
    pub representation: Representation,
    pub sessions: usize,
    pub total_bits: u64,
    pub per_second: Vec<u64>,
    pub session_bits: Vec<u64>,
}

struct UserPlan {
    arrival_tick: usize,
    path: Vec<usize>,
}

fn plan_users(domain: &NavigationDomain, config: &MultiUserConfig, seed: u64) -> Result<Vec<UserPlan>> {
    let horizon = config.duration_s * config.fps;
    let mean_ticks = config.t_mean * config.fps as f64;
    let geometric = Geometric::new((1.0 / mean_ticks).min(1.0))
        .map_err(|e| Error::InvalidParameter(format!("session length distribution: {e}")))?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut plans = Vec::with_capacity(config.nnu * config.duration_s);
    for second in 0..config.duration_s {
        for _ in 0..config.nnu {
            let arrival_tick = second * config.fps;
            let start = start_view(domain, &mut master)?;
            let length = 1 + geometric.sample(&mut master) as usize;
            let walk_seed: u64 = master.random();
            let ticks = length.min(horizon - arrival_tick);
            let path = walk_with(domain, start, ticks, &config.policy, &mut ChaCha8Rng::seed_from_u64(walk_seed));
            plans.push(UserPlan { arrival_tick, path });
        }
    }
    Ok(plans)
}

fn session_deliveries(
    costs: &StreamingCosts,
    domain: &NavigationDomain,
    path: &[usize],
    repr: Representation,
    config: &MultiUserConfig,
) -> Result<Vec<Delivery>> {
    Ok(match repr {
        Representation::Partitioned => {
            simulate_session(&costs.partition, domain, path, config.nt, config.fps)?.deliveries
        }
        Representation::AllIntra => {
            let mut seen = vec![false; domain.len()];
            let mut out = Vec::new();
            for (tick, &v) in path.iter().enumerate() {
                if !std::mem::replace(&mut seen[v], true) {
                    out.push(Delivery { tick, segment: v, bits: costs.intra_bits[v] });
                }
            }
            out
        }
        Representation::JointAll => vec![Delivery { tick: 0, segment: 0, bits: costs.joint_bits }],
    })
}

/// Server load when `nnu` users arrive at the start of every second, each
/// navigating for a geometrically distributed time with mean `t_mean`.
/// Sessions still running at the end of the simulation are cut off.
pub fn simulate_multiuser(
    costs: &StreamingCosts,
    domain: &NavigationDomain,
    config: &MultiUserConfig,
    repr: Representation,
    seed: u64,
) -> Result<MultiUserReport> {
    config.validate()?;
    if costs.intra_bits.len() != domain.len() {
        return Err(Error::InvalidParameter("one intra size per view is required".into()));
    }
    let plans = plan_users(domain, config, seed)?;
    let sessions = plans
        .par_iter()
        .map(|u| session_deliveries(costs, domain, &u.path, repr, config))
        .collect::<Result<Vec<_>>>()?;
    let mut per_second = vec![0u64; config.duration_s];
    let mut session_bits = Vec::with_capacity(sessions.len());
    for (plan, deliveries) in plans.iter().zip(&sessions) {
        let mut bits = 0;
        for d in deliveries {
            per_second[(plan.arrival_tick + d.tick) / config.fps] += d.bits;
            bits += d.bits;
        }
        session_bits.push(bits);
    }
    Ok(MultiUserReport {
        representation: repr,
        sessions: plans.len(),
        total_bits: session_bits.iter().sum(),
        per_second,
        session_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub t_mean: f64,
    pub partitioned: u64,
    pub all_intra: u64,
    pub joint_all: u64,
}

/// Totals of the three representations for each mean navigation time.
pub fn crossover_sweep(
    costs: &StreamingCosts,
    domain: &NavigationDomain,
    base: &MultiUserConfig,
    t_values: &[f64],
    seed: u64,
) -> Result<Vec<CrossoverRow>> {
    t_values
        .iter()
        .map(|&t_mean| {
            let config = MultiUserConfig { t_mean, ..*base };
            let total = |repr| simulate_multiuser(costs, domain, &config, repr, seed).map(|r| r.total_bits);
            Ok(CrossoverRow {
                t_mean,
                partitioned: total(Representation::Partitioned)?,
                all_intra: total(Representation::AllIntra)?,
                joint_all: total(Representation::JointAll)?,
            })
        })
        .collect()
}

/// First swept navigation time at which the partitioned representation
/// costs at least as much as sending the joint coding, or `None` when it
/// stays cheaper over the whole sweep.
pub fn joint_crossover(rows: &[CrossoverRow]) -> Option<f64> {
    rows.iter().find(|r| r.partitioned >= r.joint_all).map(|r| r.t_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navdomain::{DomainConfig, DomainShape, PopularityConfig};
    use crate::partition::{Costs, Segment};
    use crate::scene::{CameraIntrinsics, CameraPose};

    fn line(n: usize) -> NavigationDomain {
        let cfg = DomainConfig {
            shape: DomainShape::Line { count: n },
            delta: 0.02,
            origin: CameraPose::default(),
            metric_weights: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            popularity: PopularityConfig::Uniform,
        };
        NavigationDomain::new(&cfg, CameraIntrinsics::new(200.0, 64, 48)).unwrap()
    }

    fn blocks(n: usize, bounds: &[usize]) -> Partition {
        let mut segments = Vec::new();
        let mut lo = 0;
        for (k, &hi) in bounds.iter().chain(std::iter::once(&n)).enumerate() {
            segments.push(Segment {
                reference: lo,
                members: (lo..hi).collect(),
                ref_bits: 1000 + k as u64,
                aux_bits: 10 * (hi - lo) as u64,
                phi_size: 0,
                phi: vec![],
            });
            lo = hi;
        }
        let storage = segments.iter().map(|s| s.size_bits() as f64).sum();
        Partition {
            lambda: 0.0,
            q: 16,
            n_views: n,
            segments,
            costs: Costs { storage, rate: 0.0, objective: 0.0 },
            trace: vec![],
            converged: true,
            iterations: 0,
        }
    }

    #[test]
    fn walk_examples() {
        let d = line(20);
        let still = random_walk(&d, 5, 50, &WalkPolicy::line(1.0, 0.0, 0.0), 1).unwrap();
        assert!(still.iter().all(|&v| v == 5));
        let left = random_walk(&d, 0, 10, &WalkPolicy::line(0.0, 1.0, 0.0), 1).unwrap();
        assert!(left.iter().all(|&v| v == 0));
        assert!(random_walk(&d, 0, 10, &WalkPolicy::line(0.5, 0.1, 0.1), 1).is_err());
    }

    #[test]
    fn walk_stay_frequency() {
        let d = line(120);
        let path = random_walk(&d, 60, 1001, &WalkPolicy::default(), 42).unwrap();
        let stays = path.windows(2).filter(|w| w[0] == w[1]).count();
        let freq = stays as f64 / 1000.0;
        assert!((freq - 0.4).abs() <= 0.04, "stay frequency {freq}");
        assert!(path.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1));
    }

    #[test]
    fn walks_are_deterministic() {
        let d = line(50);
        let a = random_walk(&d, 25, 300, &WalkPolicy::default(), 7).unwrap();
        let b = random_walk(&d, 25, 300, &WalkPolicy::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_segment_delivers_once() {
        let d = line(30);
        let p = blocks(30, &[]);
        let path = random_walk(&d, 10, 600, &WalkPolicy::default(), 3).unwrap();
        let trace = simulate_session(&p, &d, &path, 5, 30).unwrap();
        assert_eq!(trace.deliveries.len(), 1);
        assert_eq!(trace.deliveries[0].tick, 0);
        assert_eq!(trace.cumulative_bits.last().copied(), Some(p.segments[0].size_bits()));
    }

    #[test]
    fn interior_path_only_first_request() {
        let d = line(60);
        let p = blocks(60, &[20, 40]);
        let path = vec![30; 300];
        let trace = simulate_session(&p, &d, &path, 5, 30).unwrap();
        assert_eq!(trace.deliveries.len(), 1);
        assert!(trace.rate_per_second[1..].iter().all(|&r| r == 0));
    }

    #[test]
    fn conservation_and_no_stalls() {
        let d = line(60);
        let p = blocks(60, &[10, 25, 33, 50]);
        for seed in 0..20 {
            let path = random_walk(&d, 30, 900, &WalkPolicy::default(), seed).unwrap();
            for nt in [1, 2, 5, 15] {
                let trace = simulate_session(&p, &d, &path, nt, 30).unwrap();
                assert_eq!(trace.stalls, 0);
                assert_eq!(*trace.cumulative_bits.last().unwrap(), trace.total_bits());
                let mut ids: Vec<usize> = trace.deliveries.iter().map(|x| x.segment).collect();
                ids.sort_unstable();
                ids.dedup();
                assert_eq!(ids.len(), trace.deliveries.len());
            }
        }
    }

    #[test]
    fn huge_ball_delivers_everything() {
        let d = line(40);
        let p = blocks(40, &[10, 20, 30]);
        let rows = average_cumulative(&p, &d, 5, 10, &[100], &WalkPolicy::default(), 9, 30).unwrap();
        assert!((rows[0].mean_bits - p.costs.storage).abs() < 1e-9);
    }

    #[test]
    fn single_path_average_matches_session() {
        let d = line(40);
        let p = blocks(40, &[10, 20, 30]);
        let rows = average_cumulative(&p, &d, 1, 20, &[5], &WalkPolicy::default(), 11, 30).unwrap();
        let ens = walk_ensemble(&d, 1, 600, &WalkPolicy::default(), 11).unwrap();
        let trace = simulate_session(&p, &d, &ens.paths[0], 5, 30).unwrap();
        assert_eq!(rows[0].mean_bits, trace.cumulative_at(20) as f64);
    }

    fn costs(n: usize) -> StreamingCosts {
        let partition = blocks(n, &[10, 20, 30]);
        StreamingCosts { partition, intra_bits: vec![900; n], joint_bits: 50_000 }
    }

    #[test]
    fn multiuser_examples() {
        let d = line(40);
        let c = costs(40);
        let base = MultiUserConfig { nnu: 0, t_mean: 30.0, duration_s: 20, nt: 5, fps: 30, policy: WalkPolicy::default() };
        for repr in [Representation::Partitioned, Representation::AllIntra, Representation::JointAll] {
            assert_eq!(simulate_multiuser(&c, &d, &base, repr, 1).unwrap().total_bits, 0);
        }
        // Sessions of a few ticks never reach the second report.
        let short = MultiUserConfig { nnu: 1, t_mean: 0.01, duration_s: 1, nt: 5, ..base };
        let report = simulate_multiuser(&c, &d, &short, Representation::Partitioned, 5).unwrap();
        let plans = plan_users(&d, &short, 5).unwrap();
        let first = simulate_session(&c.partition, &d, &plans[0].path[..1], 5, 30).unwrap().total_bits();
        assert_eq!(report.total_bits, first);
    }

    #[test]
    fn multiuser_accounting_and_determinism() {
        let d = line(40);
        let c = costs(40);
        let config = MultiUserConfig { nnu: 3, t_mean: 5.0, duration_s: 30, nt: 5, fps: 30, policy: WalkPolicy::default() };
        for repr in [Representation::Partitioned, Representation::AllIntra, Representation::JointAll] {
            let a = simulate_multiuser(&c, &d, &config, repr, 77).unwrap();
            let b = simulate_multiuser(&c, &d, &config, repr, 77).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.sessions, 90);
            assert_eq!(a.total_bits, a.per_second.iter().sum::<u64>());
            assert_eq!(a.total_bits, a.session_bits.iter().sum::<u64>());
        }
        let joint = simulate_multiuser(&c, &d, &config, Representation::JointAll, 77).unwrap();
        assert_eq!(joint.total_bits, 90 * 50_000);
    }

    #[test]
    fn crossover_detection() {
        let rows = [
            CrossoverRow { t_mean: 1.0, partitioned: 5, all_intra: 9, joint_all: 10 },
            CrossoverRow { t_mean: 5.0, partitioned: 12, all_intra: 20, joint_all: 10 },
        ];
        assert_eq!(joint_crossover(&rows), Some(5.0));
        assert_eq!(joint_crossover(&rows[..1]), None);
    }
}
