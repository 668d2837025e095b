//! Simulated elapsed-time lottery. The commitment hash stands in for the
//! trusted timer: anyone holding the scenario seed can recompute a draw.

use crate::codec::{DecodeError, Reader};
use crate::crypto::{exponential_from_unit, sha256_parts, unit_from_u64, Address, Digest32, ADDRESS_LEN};

#[derive(Debug, Clone, PartialEq)]
pub struct PoetCertificate {
    pub node: Address,
    /// Wait in ticks.
    pub draw: f64,
    pub draw_index: u64,
    pub attestation: Digest32,
}

fn commitment(node: &Address, draw_index: u64, seed: u64) -> Digest32 {
    sha256_parts(&[&node.to_bytes(), &draw_index.to_be_bytes(), &seed.to_be_bytes()])
}

fn draw_from(att: &Digest32, mean_wait: u64) -> f64 {
    let mut w = [0u8; 8];
    w.copy_from_slice(&att.0[..8]);
    exponential_from_unit(unit_from_u64(u64::from_be_bytes(w)), mean_wait as f64)
}

pub fn poet_draw(node: &Address, draw_index: u64, seed: u64, mean_wait: u64) -> PoetCertificate {
    let attestation = commitment(node, draw_index, seed);
    PoetCertificate {
        node: *node,
        draw: draw_from(&attestation, mean_wait),
        draw_index,
        attestation,
    }
}

pub fn poet_verify(cert: &PoetCertificate, seed: u64, mean_wait: u64) -> bool {
    let expect = poet_draw(&cert.node, cert.draw_index, seed, mean_wait);
    expect.attestation == cert.attestation && expect.draw.to_bits() == cert.draw.to_bits()
}

/// Smallest draw wins; equal draws go to the lower address.
pub fn poet_winner(certs: &[PoetCertificate]) -> Option<Address> {
    certs
        .iter()
        .min_by(|a, b| a.draw.total_cmp(&b.draw).then(a.node.cmp(&b.node)))
        .map(|c| c.node)
}

/// Whole ticks a node must wait before it may publish.
pub fn wait_ticks(cert: &PoetCertificate) -> u64 {
    (cert.draw.ceil() as u64).max(1)
}

impl PoetCertificate {
    /// `node ‖ draw (f64 bits) ‖ draw_index ‖ attestation`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.node.to_bytes().to_vec();
        out.extend_from_slice(&self.draw.to_bits().to_be_bytes());
        out.extend_from_slice(&self.draw_index.to_be_bytes());
        out.extend_from_slice(&self.attestation.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut rd = Reader::new(bytes);
        let node = Address::from_bytes(&rd.array::<ADDRESS_LEN>()?)
            .map_err(|_| rd.invalid("certificate node", 0))?;
        let draw = f64::from_bits(rd.u64()?);
        let draw_index = rd.u64()?;
        let attestation = Digest32(rd.array()?);
        rd.finish()?;
        Ok(Self {
            node,
            draw,
            draw_index,
            attestation,
        })
    }
}
