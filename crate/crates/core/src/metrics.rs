use crate::catalog::SfcKind;
use crate::request::{RequestStatus, SfcRequest};
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::marker::PhantomData;
use std::ops::{Index, IndexMut};

/// One value per SFC kind, serialized as a map in catalog order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerKind<T>(pub [T; SfcKind::COUNT]);

impl<T> PerKind<T> {
    pub fn from_fn(f: impl FnMut(usize) -> T) -> Self {
        Self(std::array::from_fn(f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SfcKind, &T)> {
        SfcKind::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(SfcKind, &T) -> U) -> PerKind<U> {
        PerKind::from_fn(|i| f(SfcKind::ALL[i], &self.0[i]))
    }
}

impl<T> Index<SfcKind> for PerKind<T> {
    type Output = T;
    fn index(&self, k: SfcKind) -> &T {
        &self.0[k.index()]
    }
}

impl<T> IndexMut<SfcKind> for PerKind<T> {
    fn index_mut(&mut self, k: SfcKind) -> &mut T {
        &mut self.0[k.index()]
    }
}

impl<T: Serialize> Serialize for PerKind<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(SfcKind::COUNT))?;
        for (k, v) in self.iter() {
            m.serialize_entry(k.name(), v)?;
        }
        m.end()
    }
}

impl<'de, T: Deserialize<'de> + Default> Deserialize<'de> for PerKind<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(PhantomData<T>);
        impl<'de, T: Deserialize<'de> + Default> Visitor<'de> for V<T> {
            type Value = PerKind<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map keyed by SFC kind")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = PerKind::<T>::from_fn(|_| T::default());
                while let Some(key) = map.next_key::<String>()? {
                    let kind = SfcKind::ALL
                        .into_iter()
                        .find(|k| k.name() == key)
                        .ok_or_else(|| de::Error::unknown_field(&key, &["CG", "AR", "VoIP", "VS", "MIoT", "Ind4.0"]))?;
                    out[kind] = map.next_value()?;
                }
                Ok(out)
            }
        }
        d.deserialize_map(V(PhantomData))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no requests were generated")]
    NoRequests,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub generated: PerKind<u32>,
    pub accepted: PerKind<u32>,
    pub dropped: PerKind<u32>,
    /// E2E delay of every accepted request, ms.
    pub e2e_samples: PerKind<Vec<f64>>,
    /// Σ bandwidth of accepted requests, Mbps.
    pub accepted_bandwidth_mbps: f64,
    pub ticks: u64,
    pub decisions: u64,
    pub total_reward: f64,
    pub tick_budget_exhausted: bool,
}

impl RunMetrics {
    pub fn total_generated(&self) -> u32 {
        self.generated.0.iter().sum()
    }

    pub fn total_accepted(&self) -> u32 {
        self.accepted.0.iter().sum()
    }

    pub fn total_dropped(&self) -> u32 {
        self.dropped.0.iter().sum()
    }

    pub fn pending(&self, k: SfcKind) -> u32 {
        self.generated[k] - self.accepted[k] - self.dropped[k]
    }

    pub fn acceptance_ratio(&self) -> Result<f64, MetricsError> {
        acceptance_ratio(self)
    }

    /// Per-kind acceptance ratio; `None` for kinds with no generated requests.
    pub fn per_kind_acceptance(&self) -> PerKind<Option<f64>> {
        self.generated.map(|k, &g| (g > 0).then(|| self.accepted[k] as f64 / g as f64))
    }

    /// Mean E2E delay over accepted requests only; `None` when none were accepted.
    pub fn mean_e2e(&self) -> PerKind<Option<f64>> {
        self.e2e_samples.map(|_, s| (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64))
    }

    pub fn throughput_gbps(&self) -> f64 {
        self.accepted_bandwidth_mbps / 1000.0
    }
}

/// Accepted over generated requests, all kinds pooled.
pub fn acceptance_ratio(m: &RunMetrics) -> Result<f64, MetricsError> {
    let generated = m.total_generated();
    if generated == 0 {
        return Err(MetricsError::NoRequests);
    }
    Ok(m.total_accepted() as f64 / generated as f64)
}

/// Σ bandwidth of accepted requests, in Gbps.
pub fn throughput_gbps(requests: &[SfcRequest]) -> f64 {
    requests
        .iter()
        .filter(|r| r.status == RequestStatus::Accepted)
        .map(|r| r.bandwidth)
        .sum::<f64>()
        / 1000.0
}
