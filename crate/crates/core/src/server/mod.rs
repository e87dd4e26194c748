//! Segment server: clients report their view every `N_T` moves and fetch
//! the segments their navigation ball reaches.

mod http;

pub use http::{router, serve};

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{AuxVoxel, DctCodec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::navdomain::{DomainShape, NavigationDomain};
use crate::partition::Partition;
use crate::scene::{CameraIntrinsics, CameraPose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDescriptor {
    pub id: usize,
    pub reference: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainInfo {
    #[serde(rename = "type")]
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub delta: f64,
    pub nt: usize,
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<CameraPose>,
    pub segments: Vec<SegmentDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePayload {
    pub view: usize,
    pub pose: CameraPose,
    pub width: usize,
    pub height: usize,
    /// Decoded RGB, row-major, three bytes per pixel.
    pub color_b64: String,
    /// Decoded depth in meters as little-endian f32; 0 where the reference
    /// sees nothing.
    pub depth_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPayload {
    pub id: usize,
    pub reference: ReferencePayload,
    pub aux: Vec<AuxVoxel>,
    pub ref_bits: u64,
    pub aux_bits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session: String,
    pub current_view: Option<usize>,
    pub delivered: BTreeSet<usize>,
    pub pending: BTreeSet<usize>,
    pub bytes: u64,
    pub reports: u64,
    pub fetches: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub bytes: u64,
    pub reports: u64,
    pub fetches: u64,
    pub segments_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub session: String,
    pub current_view: Option<usize>,
    pub bytes: u64,
    pub reports: u64,
    pub fetches: u64,
    pub segments_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub sessions: Vec<SessionStats>,
    pub total: Totals,
}

/// Shared server state. Domain, partition and payloads are read-only after
/// construction; each session sits behind its own lock.
pub struct ServerState {
    domain: NavigationDomain,
    partition: Option<Partition>,
    nt: usize,
    membership: Vec<usize>,
    payloads: Vec<Arc<[u8]>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionState>>>>,
}

/// Session id used when a fetch names none.
pub const ANONYMOUS: &str = "anonymous";

impl ServerState {
    /// Prepares the payload of every segment of `partition`.
    pub fn new(dataset: &Dataset, partition: Partition, nt: usize) -> Result<Self> {
        if partition.n_views != dataset.len() {
            return Err(Error::InvalidParameter("partition and scene domain sizes differ".into()));
        }
        partition.check_cover()?;
        if nt == 0 {
            return Err(Error::InvalidParameter("N_T must be positive".into()));
        }
        let codec = DctCodec::new(dataset, partition.q);
        let payloads = partition
            .segments
            .par_iter()
            .enumerate()
            .map(|(id, seg)| {
                let reference = codec.encode_reference(seg.reference)?;
                let aux = codec.encode_aux(&seg.innovation())?;
                let decoded = reference.decode();
                let color: Vec<u8> = decoded.color.iter().flatten().copied().collect();
                let depth: Vec<u8> = decoded
                    .depth
                    .iter()
                    .zip(&decoded.mask)
                    .flat_map(|(&d, &m)| (if m { d as f32 } else { 0.0 }).to_le_bytes())
                    .collect();
                let payload = SegmentPayload {
                    id,
                    reference: ReferencePayload {
                        view: seg.reference,
                        pose: reference.pose,
                        width: decoded.width,
                        height: decoded.height,
                        color_b64: B64.encode(color),
                        depth_b64: B64.encode(depth),
                    },
                    aux: aux.decode(),
                    ref_bits: seg.ref_bits,
                    aux_bits: seg.aux_bits,
                };
                Ok(Arc::from(serde_json::to_vec(&payload)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain: dataset.domain.clone(),
            membership: partition.membership(),
            partition: Some(partition),
            nt,
            payloads,
            sessions: Mutex::default(),
        })
    }

    /// A server with a domain but no partition; every segment endpoint
    /// reports that nothing is loaded.
    pub fn without_partition(domain: NavigationDomain, nt: usize) -> Self {
        Self {
            domain,
            partition: None,
            nt,
            membership: Vec::new(),
            payloads: Vec::new(),
            sessions: Mutex::default(),
        }
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn domain(&self) -> &NavigationDomain {
        &self.domain
    }

    fn partition(&self) -> Result<&Partition> {
        self.partition.as_ref().ok_or(Error::NoPartition)
    }

    fn session(&self, id: &str) -> Arc<Mutex<SessionState>> {
        let mut sessions = self.sessions.lock().unwrap();
        sessions
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(SessionState { session: id.to_string(), ..Default::default() })))
            .clone()
    }

    pub fn domain_info(&self) -> Result<DomainInfo> {
        let partition = self.partition()?;
        let (rows, cols) = self.domain.shape.dims();
        let kind = match self.domain.shape {
            DomainShape::Line { .. } => "line",
            DomainShape::Grid { .. } => "grid",
        };
        Ok(DomainInfo {
            kind: kind.into(),
            rows,
            cols,
            delta: self.domain.delta,
            nt: self.nt,
            intrinsics: self.domain.intrinsics,
            poses: self.domain.poses.clone(),
            segments: partition
                .segments
                .iter()
                .enumerate()
                .map(|(id, s)| SegmentDescriptor { id, reference: s.reference, members: s.members.clone() })
                .collect(),
        })
    }

    /// Segments meeting the navigation ball of `view` that the session has
    /// neither received nor been told to fetch.
    pub fn position_report(&self, session: &str, view: usize) -> Result<Vec<usize>> {
        self.partition()?;
        let ball = self.domain.navigation_ball(view, self.nt)?;
        let mut wanted: Vec<usize> = ball.into_iter().map(|v| self.membership[v]).collect();
        wanted.sort_unstable();
        wanted.dedup();
        let state = self.session(session);
        let mut state = state.lock().unwrap();
        state.current_view = Some(view);
        state.reports += 1;
        let fresh: Vec<usize> =
            wanted.into_iter().filter(|s| !state.delivered.contains(s) && !state.pending.contains(s)).collect();
        state.pending.extend(&fresh);
        Ok(fresh)
    }

    /// Serialized payload of segment `id`, charged to `session`.
    pub fn segment_fetch(&self, session: Option<&str>, id: usize) -> Result<Arc<[u8]>> {
        self.partition()?;
        let payload = self.payloads.get(id).ok_or(Error::UnknownSegment(id))?.clone();
        let state = self.session(session.unwrap_or(ANONYMOUS));
        let mut state = state.lock().unwrap();
        state.pending.remove(&id);
        state.delivered.insert(id);
        state.fetches += 1;
        state.bytes += payload.len() as u64;
        Ok(payload)
    }

    pub fn stats(&self, session: Option<&str>) -> Stats {
        let handles: Vec<Arc<Mutex<SessionState>>> = {
            let sessions = self.sessions.lock().unwrap();
            let mut keys: Vec<&String> = sessions.keys().filter(|k| session.is_none_or(|s| s == k.as_str())).collect();
            keys.sort();
            keys.into_iter().map(|k| sessions[k].clone()).collect()
        };
        let mut total = Totals::default();
        let sessions = handles
            .iter()
            .map(|h| {
                let s = h.lock().unwrap();
                let row = SessionStats {
                    session: s.session.clone(),
                    current_view: s.current_view,
                    bytes: s.bytes,
                    reports: s.reports,
                    fetches: s.fetches,
                    segments_delivered: s.delivered.len() as u64,
                };
                total.bytes += row.bytes;
                total.reports += row.reports;
                total.fetches += row.fetches;
                total.segments_delivered += row.segments_delivered;
                row
            })
            .collect();
        Stats { sessions, total }
    }
}
