//! Discrete-event model of the positioning signal path.
//!
//! Two architectures are compared. In the legacy one every measurement report
//! travels UE → BS → AMF → LMF. In the fog one it travels UE → BS → fog over
//! I1, where the fog instance managing the serving BS keeps the UE's location
//! context. When the serving BS moves to a BS managed by another fog instance
//! the context is handed over through the central LMF (fog → LMF → fog, I2).
//!
//! Latencies are per-hop `fixed + N(0, jitter²)`, truncated at zero. Events
//! are processed from a time-ordered queue, so the log is nondecreasing in
//! time.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::Rng;

use crate::ekf::{EstimatorState, StateMatrix, StateVector, STATE_DIM};
use crate::error::{ConfigError, Error, Result};
use crate::measurements::gaussian;
use crate::runner::Tracker;
use crate::scenario::{nearest_bs, BsSite, ScenarioConfig};
use crate::stats::ErrorReport;
use crate::{rng_from_seed, SimRng, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Ue,
    Bs(u32),
    Amf,
    Lmf,
    Fog(u32),
}

impl core::fmt::Display for Node {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Node::Ue => f.write_str("UE"),
            Node::Bs(id) => write!(f, "BS{id}"),
            Node::Amf => f.write_str("AMF"),
            Node::Lmf => f.write_str("LMF"),
            Node::Fog(id) => write!(f, "FOG{id}"),
        }
    }
}

/// Link endpoint selector. `AnyBs` / `AnyFog` match every BS / fog node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodePattern {
    Ue,
    AnyBs,
    Bs(u32),
    Amf,
    Lmf,
    AnyFog,
    Fog(u32),
}

impl NodePattern {
    pub fn matches(self, node: Node) -> bool {
        match (self, node) {
            (NodePattern::Ue, Node::Ue)
            | (NodePattern::Amf, Node::Amf)
            | (NodePattern::Lmf, Node::Lmf) => true,
            (NodePattern::AnyBs, Node::Bs(_)) | (NodePattern::AnyFog, Node::Fog(_)) => true,
            (NodePattern::Bs(a), Node::Bs(b)) | (NodePattern::Fog(a), Node::Fog(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    pub fixed_ms: f64,
    /// Std of the additive Gaussian jitter.
    pub jitter_ms: f64,
}

impl LatencyModel {
    pub const fn fixed(fixed_ms: f64) -> Self {
        Self {
            fixed_ms,
            jitter_ms: 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter_ms == 0.0 {
            return self.fixed_ms;
        }
        (self.fixed_ms + self.jitter_ms * gaussian(rng)).max(0.0)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.fixed_ms.is_finite() && self.fixed_ms >= 0.0) {
            return Err(ConfigError::new(
                "fog.links.fixed_ms",
                ">= 0",
                self.fixed_ms,
            ));
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err(ConfigError::new(
                "fog.links.jitter_ms",
                ">= 0",
                self.jitter_ms,
            ));
        }
        Ok(())
    }
}

/// Undirected link class; the first matching entry of a topology wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub a: NodePattern,
    pub b: NodePattern,
    pub latency: LatencyModel,
}

impl LinkSpec {
    pub fn new(a: NodePattern, b: NodePattern, latency: LatencyModel) -> Self {
        Self { a, b, latency }
    }

    fn covers(&self, x: Node, y: Node) -> bool {
        (self.a.matches(x) && self.b.matches(y)) || (self.a.matches(y) && self.b.matches(x))
    }
}

/// Default link set: legacy hops 5 ms each, BS–fog (I1) 4 ms, fog–LMF (I2)
/// 5 ms, all with 0.5 ms jitter. Illustrative values only.
pub fn default_links() -> Vec<LinkSpec> {
    let l = |fixed_ms| LatencyModel {
        fixed_ms,
        jitter_ms: 0.5,
    };
    alloc::vec![
        LinkSpec::new(NodePattern::Ue, NodePattern::AnyBs, l(5.0)),
        LinkSpec::new(NodePattern::AnyBs, NodePattern::Amf, l(5.0)),
        LinkSpec::new(NodePattern::Amf, NodePattern::Lmf, l(5.0)),
        LinkSpec::new(NodePattern::AnyBs, NodePattern::AnyFog, l(4.0)),
        LinkSpec::new(NodePattern::AnyFog, NodePattern::Lmf, l(5.0)),
    ]
}

/// Every link class at the same fixed latency, no jitter.
pub fn uniform_links(fixed_ms: f64) -> Vec<LinkSpec> {
    default_links()
        .into_iter()
        .map(|l| LinkSpec {
            latency: LatencyModel::fixed(fixed_ms),
            ..l
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FogInstance {
    pub id: u32,
    pub bs_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FogTopology {
    pub fog_instances: Vec<FogInstance>,
    pub links: Vec<LinkSpec>,
    /// In the fog architecture, forward the position estimate to the central
    /// LMF over I2 every this many epochs. Zero disables it.
    pub lmf_report_every: u64,
}

impl FogTopology {
    /// Splits BS ids `0..bs_count` into `n_fogs` contiguous groups of
    /// `ceil(bs_count / n_fogs)`, fog ids starting at 1.
    pub fn split_even(bs_count: usize, n_fogs: usize, links: Vec<LinkSpec>) -> Result<Self> {
        if n_fogs == 0 || n_fogs > bs_count {
            return Err(Error::Topology(
                "fog count must be in 1..=number of base stations",
            ));
        }
        let chunk = bs_count.div_ceil(n_fogs);
        let fog_instances = (0..bs_count as u32)
            .collect::<Vec<_>>()
            .chunks(chunk)
            .enumerate()
            .map(|(i, ids)| FogInstance {
                id: i as u32 + 1,
                bs_ids: ids.to_vec(),
            })
            .collect();
        Ok(Self {
            fog_instances,
            links,
            lmf_report_every: 0,
        })
    }

    pub fn fog_of(&self, bs_id: u32) -> Option<u32> {
        self.fog_instances
            .iter()
            .find(|f| f.bs_ids.contains(&bs_id))
            .map(|f| f.id)
    }

    pub fn link(&self, a: Node, b: Node) -> Option<&LatencyModel> {
        self.links
            .iter()
            .find(|l| l.covers(a, b))
            .map(|l| &l.latency)
    }

    /// Every deployed BS managed by exactly one fog instance, no unknown BS
    /// ids, unique fog ids, and a latency for every hop either architecture
    /// can use.
    pub fn validate(&self, sites: &[BsSite]) -> Result<()> {
        if self.fog_instances.is_empty() {
            return Err(Error::Topology("no fog instances"));
        }
        for (i, f) in self.fog_instances.iter().enumerate() {
            if self.fog_instances[..i].iter().any(|g| g.id == f.id) {
                return Err(Error::Topology("duplicate fog instance id"));
            }
            for bs in &f.bs_ids {
                if !sites.iter().any(|s| s.id == *bs) {
                    return Err(Error::Topology(
                        "fog instance lists an undeployed base station",
                    ));
                }
            }
        }
        for site in sites {
            let owners = self
                .fog_instances
                .iter()
                .filter(|f| f.bs_ids.contains(&site.id))
                .count();
            match owners {
                0 => return Err(Error::UnmanagedBs(site.id)),
                1 => {}
                _ => {
                    return Err(Error::Topology(
                        "base station managed by more than one fog instance",
                    ))
                }
            }
        }
        for l in &self.links {
            l.latency.validate()?;
        }
        for site in sites {
            let fog = Node::Fog(self.fog_of(site.id).expect("checked above"));
            let bs = Node::Bs(site.id);
            for (a, b) in [(Node::Ue, bs), (bs, Node::Amf), (bs, fog)] {
                if self.link(a, b).is_none() {
                    return Err(Error::Topology("missing link latency"));
                }
            }
        }
        if self.link(Node::Amf, Node::Lmf).is_none() {
            return Err(Error::Topology("missing link latency"));
        }
        for f in &self.fog_instances {
            if self.link(Node::Fog(f.id), Node::Lmf).is_none() {
                return Err(Error::Topology("missing link latency"));
            }
        }
        Ok(())
    }

    fn path_latency<R: Rng + ?Sized>(&self, path: &[Node], rng: &mut R) -> Result<f64> {
        let mut total = 0.0;
        for hop in path.windows(2) {
            let model = self
                .link(hop[0], hop[1])
                .ok_or(Error::Topology("missing link latency"))?;
            total += model.sample(rng);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Architecture {
    Legacy,
    Fog,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Legacy => "legacy",
            Architecture::Fog => "fog",
        }
    }

    /// Hops every measurement report takes.
    pub fn report_hops(self) -> usize {
        match self {
            Architecture::Legacy => 3,
            Architecture::Fog => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: Vec<Node>,
    pub latency_ms: f64,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }
}

/// Path and sampled end-to-end latency of one measurement report from the UE
/// served by `serving_bs`.
pub fn route_report<R: Rng + ?Sized>(
    serving_bs: u32,
    topology: &FogTopology,
    architecture: Architecture,
    rng: &mut R,
) -> Result<Route> {
    let fog = topology
        .fog_of(serving_bs)
        .ok_or(Error::UnmanagedBs(serving_bs))?;
    let path = match architecture {
        Architecture::Legacy => alloc::vec![Node::Ue, Node::Bs(serving_bs), Node::Amf, Node::Lmf],
        Architecture::Fog => alloc::vec![Node::Ue, Node::Bs(serving_bs), Node::Fog(fog)],
    };
    let latency_ms = topology.path_latency(&path, rng)?;
    Ok(Route { path, latency_ms })
}

/// Per-UE positioning context held by exactly one fog instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationContext {
    pub ue_id: u32,
    pub state: EstimatorState,
    pub owner: u32,
    /// Incremented on every transfer.
    pub version: u64,
}

const CONTEXT_BYTES: usize = 4 + 4 + 8 + 8 + 8 * (STATE_DIM + STATE_DIM * STATE_DIM);

impl LocationContext {
    /// Little-endian wire image: ue id, owner, version, epoch, mean, covariance
    /// (row-major). Floats are copied bit for bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTEXT_BYTES);
        out.extend_from_slice(&self.ue_id.to_le_bytes());
        out.extend_from_slice(&self.owner.to_le_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.state.epoch.to_le_bytes());
        for v in self.state.mean.iter() {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        for r in 0..STATE_DIM {
            for c in 0..STATE_DIM {
                out.extend_from_slice(&self.state.covariance[(r, c)].to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != CONTEXT_BYTES {
            return None;
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_bits(u64_at(o));
        let base = 24;
        let mean = StateVector::from_fn(|i, _| f64_at(base + 8 * i));
        let cov_base = base + 8 * STATE_DIM;
        let covariance = StateMatrix::from_fn(|r, c| f64_at(cov_base + 8 * (r * STATE_DIM + c)));
        Some(Self {
            ue_id: u32_at(0),
            owner: u32_at(4),
            version: u64_at(8),
            state: EstimatorState {
                epoch: u64_at(16),
                mean,
                covariance,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// Fog architecture report, UE → BS → fog over I1.
    MeasReportI1,
    /// Position estimate forwarded fog → central LMF over I2.
    PositionToLmfI2,
    /// Location context handover fog → LMF → fog over I2.
    ContextTransfer,
    /// Legacy architecture report, UE → BS → AMF → LMF.
    LegacyHop,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::MeasReportI1 => "meas_report_i1",
            EventKind::PositionToLmfI2 => "position_to_lmf_i2",
            EventKind::ContextTransfer => "context_transfer",
            EventKind::LegacyHop => "legacy_hop",
        }
    }

    pub fn is_report(self) -> bool {
        matches!(self, EventKind::MeasReportI1 | EventKind::LegacyHop)
    }
}

/// A delivered message. `t_ms` is the arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct PositioningEvent {
    pub t_ms: f64,
    pub emitted_ms: f64,
    pub kind: EventKind,
    pub path: Vec<Node>,
    pub latency_ms: f64,
    /// Context owner when the message was sent; `None` in the legacy
    /// architecture, where the central LMF holds all context.
    pub fog_owner: Option<u32>,
    pub context_version: u64,
    pub payload_bytes: usize,
}

/// Hands the context to the fog instance managing the BS nearest to
/// `position`, if that differs from the current owner. The context travels
/// fog → central LMF → fog as its wire image.
pub fn step_mobility<R: Rng + ?Sized>(
    t_ms: f64,
    position: &Vec2,
    sites: &[BsSite],
    topology: &FogTopology,
    context: &mut LocationContext,
    rng: &mut R,
) -> Result<Option<PositioningEvent>> {
    let serving = nearest_bs(position, sites, 1)?[0];
    let target = topology
        .fog_of(serving.id)
        .ok_or(Error::UnmanagedBs(serving.id))?;
    if target == context.owner {
        return Ok(None);
    }
    let path = alloc::vec![Node::Fog(context.owner), Node::Lmf, Node::Fog(target)];
    let latency_ms = topology.path_latency(&path, rng)?;
    let wire = context.to_bytes();
    let mut received =
        LocationContext::from_bytes(&wire).ok_or(Error::Topology("corrupt context image"))?;
    received.owner = target;
    received.version += 1;
    *context = received;
    Ok(Some(PositioningEvent {
        t_ms: t_ms + latency_ms,
        emitted_ms: t_ms,
        kind: EventKind::ContextTransfer,
        path,
        latency_ms,
        fog_owner: Some(target),
        context_version: context.version,
        payload_bytes: wire.len(),
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub architecture: Architecture,
    /// Delivered events in arrival order.
    pub events: Vec<PositioningEvent>,
    /// End-to-end latency of measurement reports, ms.
    pub latency: ErrorReport,
    pub reports: usize,
    pub transfers: usize,
    pub final_context: Option<LocationContext>,
}

struct Queued {
    t_ms: f64,
    seq: u64,
    item: QueueItem,
}

enum QueueItem {
    Tick,
    Deliver(PositioningEvent),
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t_ms
            .total_cmp(&other.t_ms)
            .then(self.seq.cmp(&other.seq))
    }
}

const REPORT_HEADER_BYTES: usize = 16;
const IMU_BYTES: usize = 24;
const CELL_OBS_BYTES: usize = 20;
const POSITION_BYTES: usize = 24;

/// Drives one UE along the scenario trajectory. Each epoch the filter runs,
/// mobility is checked (fog only) and one measurement report is routed.
/// Filter draws use the run seed; network latencies use a separate stream of
/// the same seed.
pub fn simulate_session(
    config: &ScenarioConfig,
    topology: &FogTopology,
    architecture: Architecture,
) -> Result<SessionResult> {
    let mut tracker = Tracker::new(config)?;
    let sites = tracker.scenario().sites.clone();
    topology.validate(&sites)?;
    let mut net_rng: SimRng = rng_from_seed(config.seed);
    net_rng.set_stream(1);

    let dt_ms = config.epoch_dt_s * 1000.0;
    let mut queue: BinaryHeap<Reverse<Queued>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BinaryHeap<Reverse<Queued>>, t_ms: f64, item: QueueItem| {
        queue.push(Reverse(Queued { t_ms, seq, item }));
        seq += 1;
    };
    push(&mut queue, 0.0, QueueItem::Tick);

    let mut context: Option<LocationContext> = None;
    let mut events = Vec::new();
    let mut latencies = Vec::new();
    let mut transfers = 0;
    let mut epoch = 0u64;

    while let Some(Reverse(q)) = queue.pop() {
        match q.item {
            QueueItem::Deliver(ev) => {
                if ev.kind.is_report() {
                    latencies.push(ev.latency_ms);
                }
                events.push(ev);
            }
            QueueItem::Tick => {
                let Some(step) = tracker.step()? else {
                    continue;
                };
                let t_ms = q.t_ms;
                let position = step.truth.position;
                let serving = nearest_bs(&position, &sites, 1)?[0].id;

                let fog_owner = match architecture {
                    Architecture::Legacy => None,
                    Architecture::Fog => {
                        let ctx = match context.as_mut() {
                            None => {
                                let owner = topology
                                    .fog_of(serving)
                                    .ok_or(Error::UnmanagedBs(serving))?;
                                context.insert(LocationContext {
                                    ue_id: 0,
                                    state: step.prior.clone(),
                                    owner,
                                    version: 0,
                                })
                            }
                            Some(ctx) => ctx,
                        };
                        if let Some(ev) =
                            step_mobility(t_ms, &position, &sites, topology, ctx, &mut net_rng)?
                        {
                            transfers += 1;
                            push(&mut queue, ev.t_ms, QueueItem::Deliver(ev));
                        }
                        ctx.state = step.posterior.clone();
                        Some(ctx.owner)
                    }
                };
                let version = context.as_ref().map_or(0, |c| c.version);

                let route = route_report(serving, topology, architecture, &mut net_rng)?;
                let payload_bytes = REPORT_HEADER_BYTES
                    + step.batch.imu.map_or(0, |_| IMU_BYTES)
                    + CELL_OBS_BYTES * step.batch.cellular.len();
                let kind = match architecture {
                    Architecture::Legacy => EventKind::LegacyHop,
                    Architecture::Fog => EventKind::MeasReportI1,
                };
                push(
                    &mut queue,
                    t_ms + route.latency_ms,
                    QueueItem::Deliver(PositioningEvent {
                        t_ms: t_ms + route.latency_ms,
                        emitted_ms: t_ms,
                        kind,
                        path: route.path,
                        latency_ms: route.latency_ms,
                        fog_owner,
                        context_version: version,
                        payload_bytes,
                    }),
                );

                if let (Architecture::Fog, Some(owner)) = (architecture, fog_owner) {
                    let every = topology.lmf_report_every;
                    if every > 0 && (epoch + 1).is_multiple_of(every) {
                        let path = alloc::vec![Node::Fog(owner), Node::Lmf];
                        let latency_ms = topology.path_latency(&path, &mut net_rng)?;
                        push(
                            &mut queue,
                            t_ms + latency_ms,
                            QueueItem::Deliver(PositioningEvent {
                                t_ms: t_ms + latency_ms,
                                emitted_ms: t_ms,
                                kind: EventKind::PositionToLmfI2,
                                path,
                                latency_ms,
                                fog_owner,
                                context_version: version,
                                payload_bytes: POSITION_BYTES,
                            }),
                        );
                    }
                }

                epoch += 1;
                push(&mut queue, epoch as f64 * dt_ms, QueueItem::Tick);
            }
        }
    }

    let reports = latencies.len();
    Ok(SessionResult {
        architecture,
        events,
        latency: ErrorReport::from_samples(latencies)?,
        reports,
        transfers,
        final_context: context,
    })
}

/// Checks the handover bookkeeping of a fog session log: each transfer
/// raises the version by exactly one and moves ownership to a different fog,
/// and every other event carries the owner and version of the most recent
/// transfer emitted before it.
pub fn ownership_is_consistent(events: &[PositioningEvent]) -> bool {
    let mut by_emission: Vec<&PositioningEvent> =
        events.iter().filter(|e| e.fog_owner.is_some()).collect();
    by_emission.sort_by(|a, b| {
        a.emitted_ms.total_cmp(&b.emitted_ms).then(
            (b.kind == EventKind::ContextTransfer).cmp(&(a.kind == EventKind::ContextTransfer)),
        )
    });
    let mut current: Option<(u32, u64)> = None;
    for e in by_emission {
        let owner = e.fog_owner.expect("filtered");
        match (e.kind, current) {
            (EventKind::ContextTransfer, Some((prev_owner, prev_version))) => {
                if e.context_version != prev_version + 1 || owner == prev_owner {
                    return false;
                }
                let from_ok = matches!(e.path.first(), Some(Node::Fog(id)) if *id == prev_owner);
                let to_ok = matches!(e.path.last(), Some(Node::Fog(id)) if *id == owner);
                if !(from_ok && to_ok) {
                    return false;
                }
                current = Some((owner, e.context_version));
            }
            (EventKind::ContextTransfer, None) => return false,
            (_, None) => current = Some((owner, e.context_version)),
            (_, Some(cur)) => {
                if (owner, e.context_version) != cur {
                    return false;
                }
            }
        }
    }
    true
}
