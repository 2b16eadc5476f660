use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// r quoted in the literature for one round of two-qubit tomography. The
/// naive count 15·15 = 225 is what [`resource_ledger`] computes; both are reported.
pub const QUOTED_TOMOGRAPHY_R: u64 = 165;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum ProtocolKind {
    ConcurrenceMoments,
    Spectrum { d: u64 },
    Tomography { d: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub protocol: ProtocolKind,
    /// Parameters estimated.
    pub r_p: u64,
    /// Copies consumed per round.
    pub r_c: u64,
    pub r: u64,
    /// Literature value of r where one is quoted and differs from the count.
    pub quoted_r: Option<u64>,
}

pub fn resource_ledger(protocol: ProtocolKind) -> Result<ResourceLedger> {
    let (r_p, r_c, quoted_r) = match protocol {
        // four binary-POVM means; groups use 2+4+6+8 copies
        ProtocolKind::ConcurrenceMoments => (4, (1..=4).map(|k| 2 * k).sum(), None),
        ProtocolKind::Spectrum { d } | ProtocolKind::Tomography { d } if d < 2 => {
            return Err(Error::InvalidParameter(format!("local dimension {d} < 2")))
        }
        // moments of order 2..d² with Tr σ = 1 known; order n costs n copies
        ProtocolKind::Spectrum { d } => (d * d - 1, (d.pow(4) + d * d - 2) / 2, None),
        ProtocolKind::Tomography { d } => {
            let n = d.pow(4) - 1;
            (n, n, (d == 2).then_some(QUOTED_TOMOGRAPHY_R))
        }
    };
    Ok(ResourceLedger {
        protocol,
        r_p,
        r_c,
        r: r_p * r_c,
        quoted_r,
    })
}
