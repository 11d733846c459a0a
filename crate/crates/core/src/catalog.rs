//! VNF and service-chain catalogs.
//!
//! The SFC table (chains, bandwidth, E2E budget, bundle range) is fixed by the
//! 5G-core service profiles. Per-VNF resource demands and processing times are
//! not published alongside that table, so the shipped [`VnfCatalog::default`]
//! values are non-normative and can be replaced from configuration.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The six virtual network function types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VnfType {
    Nat,
    Fw,
    Voc,
    Tm,
    Wo,
    Idps,
}

impl VnfType {
    pub const COUNT: usize = 6;
    pub const ALL: [VnfType; Self::COUNT] = [
        VnfType::Nat,
        VnfType::Fw,
        VnfType::Voc,
        VnfType::Tm,
        VnfType::Wo,
        VnfType::Idps,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            VnfType::Nat => "NAT",
            VnfType::Fw => "FW",
            VnfType::Voc => "VOC",
            VnfType::Tm => "TM",
            VnfType::Wo => "WO",
            VnfType::Idps => "IDPS",
        }
    }
}

impl fmt::Display for VnfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The six service-chain types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SfcKind {
    #[serde(rename = "CG")]
    Cg,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "VoIP")]
    Voip,
    #[serde(rename = "VS")]
    Vs,
    #[serde(rename = "MIoT")]
    Miot,
    #[serde(rename = "Ind4.0")]
    Ind40,
}

impl SfcKind {
    pub const COUNT: usize = 6;
    pub const ALL: [SfcKind; Self::COUNT] = [
        SfcKind::Cg,
        SfcKind::Ar,
        SfcKind::Voip,
        SfcKind::Vs,
        SfcKind::Miot,
        SfcKind::Ind40,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SfcKind::Cg => "CG",
            SfcKind::Ar => "AR",
            SfcKind::Voip => "VoIP",
            SfcKind::Vs => "VS",
            SfcKind::Miot => "MIoT",
            SfcKind::Ind40 => "Ind4.0",
        }
    }
}

impl fmt::Display for SfcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Resource demand and processing time of one VNF instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnfCatalogEntry {
    pub vnf_type: VnfType,
    /// GHz
    pub cpu_demand: f64,
    /// GB
    pub storage_demand: f64,
    /// GB
    pub ram_demand: f64,
    /// ms
    pub proc_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VnfCatalogEntry>", into = "Vec<VnfCatalogEntry>")]
pub struct VnfCatalog {
    entries: Vec<VnfCatalogEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("VNF catalog must have exactly one entry per VNF type, got {0} entries")]
    WrongEntryCount(usize),
    #[error("VNF catalog has no entry for {0}")]
    MissingType(VnfType),
    #[error("VNF {0} has a non-positive demand or processing time")]
    NonPositive(VnfType),
}

impl VnfCatalog {
    pub fn new(mut entries: Vec<VnfCatalogEntry>) -> Result<Self, CatalogError> {
        if entries.len() != VnfType::COUNT {
            return Err(CatalogError::WrongEntryCount(entries.len()));
        }
        if let Some(v) = VnfType::ALL.into_iter().find(|v| entries.iter().all(|e| e.vnf_type != *v)) {
            return Err(CatalogError::MissingType(v));
        }
        entries.sort_by_key(|e| e.vnf_type);
        for e in &entries {
            let positive = [e.cpu_demand, e.storage_demand, e.ram_demand, e.proc_time]
                .iter()
                .all(|x| x.is_finite() && *x > 0.0);
            if !positive {
                return Err(CatalogError::NonPositive(e.vnf_type));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, v: VnfType) -> &VnfCatalogEntry {
        &self.entries[v.index()]
    }

    pub fn entries(&self) -> &[VnfCatalogEntry] {
        &self.entries
    }
}

impl Default for VnfCatalog {
    /// Sized so that a 64 GHz data center hosts roughly ten mixed instances and
    /// every chain fits its E2E budget when served without waiting.
    fn default() -> Self {
        let e = |vnf_type, cpu_demand, storage_demand, ram_demand, proc_time| VnfCatalogEntry {
            vnf_type,
            cpu_demand,
            storage_demand,
            ram_demand,
            proc_time,
        };
        Self::new(vec![
            e(VnfType::Nat, 4.0, 100.0, 8.0, 1.0),
            e(VnfType::Fw, 6.0, 150.0, 16.0, 1.0),
            e(VnfType::Voc, 8.0, 200.0, 24.0, 2.0),
            e(VnfType::Tm, 5.0, 120.0, 12.0, 1.0),
            e(VnfType::Wo, 7.0, 180.0, 16.0, 2.0),
            e(VnfType::Idps, 9.0, 250.0, 24.0, 1.0),
        ])
        .expect("default VNF catalog is valid")
    }
}

impl TryFrom<Vec<VnfCatalogEntry>> for VnfCatalog {
    type Error = CatalogError;
    fn try_from(v: Vec<VnfCatalogEntry>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<VnfCatalog> for Vec<VnfCatalogEntry> {
    fn from(c: VnfCatalog) -> Self {
        c.entries
    }
}

/// Bandwidth requirement of a chain type, in Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    /// Drawn uniformly per request at generation time.
    Range(f64, f64),
}

impl Bandwidth {
    pub fn min(self) -> f64 {
        match self {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Range(lo, _) => lo,
        }
    }

    pub fn max(self) -> f64 {
        match self {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Range(_, hi) => hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfcType {
    pub kind: SfcKind,
    pub chain: Vec<VnfType>,
    pub bandwidth: Bandwidth,
    /// E2E delay budget in ms.
    pub e2e_limit: f64,
    /// Inclusive bundle-size interval.
    pub bundle_range: (u32, u32),
}

impl SfcType {
    pub fn chain_len(&self) -> usize {
        self.chain.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfcCatalog {
    types: Vec<SfcType>,
}

impl SfcCatalog {
    pub fn get(&self, kind: SfcKind) -> &SfcType {
        &self.types[kind.index()]
    }

    pub fn types(&self) -> &[SfcType] {
        &self.types
    }

    /// Largest fixed or ranged bandwidth over all chain types.
    pub fn max_bandwidth(&self) -> f64 {
        self.types.iter().map(|t| t.bandwidth.max()).fold(0.0, f64::max)
    }

    /// Scale every bundle range by `factor`, keeping each bound at least 1.
    pub fn scaled_bundles(&self, factor: f64) -> Self {
        let scale = |x: u32| ((x as f64 * factor).round() as u32).max(1);
        let types = self
            .types
            .iter()
            .map(|t| {
                let (lo, hi) = t.bundle_range;
                let (lo, hi) = (scale(lo), scale(hi));
                SfcType {
                    bundle_range: (lo.min(hi), hi),
                    ..t.clone()
                }
            })
            .collect();
        Self { types }
    }
}

impl Default for SfcCatalog {
    fn default() -> Self {
        use VnfType::*;
        let t = |kind, chain: &[VnfType], bandwidth, e2e_limit, bundle_range| SfcType {
            kind,
            chain: chain.to_vec(),
            bandwidth,
            e2e_limit,
            bundle_range,
        };
        Self {
            types: vec![
                t(SfcKind::Cg, &[Nat, Fw, Voc, Wo, Idps], Bandwidth::Fixed(4.0), 80.0, (40, 55)),
                t(SfcKind::Ar, &[Nat, Fw, Tm, Voc, Idps], Bandwidth::Fixed(100.0), 10.0, (1, 4)),
                t(SfcKind::Voip, &[Nat, Fw, Tm, Fw, Nat], Bandwidth::Fixed(0.064), 100.0, (100, 200)),
                t(SfcKind::Vs, &[Nat, Fw, Tm, Voc, Idps], Bandwidth::Fixed(4.0), 100.0, (50, 100)),
                t(SfcKind::Miot, &[Nat, Fw, Idps], Bandwidth::Range(1.0, 50.0), 5.0, (10, 15)),
                t(SfcKind::Ind40, &[Nat, Fw], Bandwidth::Fixed(70.0), 8.0, (1, 4)),
            ],
        }
    }
}
