use std::ops::RangeInclusive;

use super::graph::NetworkGraph;
use super::weights::WeightStore;
use crate::error::{Error, Result};

pub const MAX_QP: u8 = 51;

/// Filter weights per QP band for one architecture. Bands are disjoint and
/// cover `0..=51`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBank {
    graph: NetworkGraph,
    bands: Vec<Band>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub qps: RangeInclusive<u8>,
    /// QP the band's model was trained at.
    pub trained_qp: u8,
    pub weights: WeightStore<f32>,
}

/// Splits `0..=51` at the midpoints between consecutive trained QPs
/// (`22, 27, 32, 37` gives `0-24, 25-29, 30-34, 35-51`).
pub fn band_ranges(trained: &[u8]) -> Result<Vec<RangeInclusive<u8>>> {
    if trained.is_empty() || trained.windows(2).any(|w| w[0] >= w[1]) || trained[trained.len() - 1] > MAX_QP {
        return Err(Error::Invalid(format!(
            "trained QPs must be strictly increasing within 0..=51, got {trained:?}"
        )));
    }
    let mut out = Vec::with_capacity(trained.len());
    let mut lo = 0u8;
    for (i, &q) in trained.iter().enumerate() {
        let hi = match trained.get(i + 1) {
            Some(&next) => ((q as u16 + next as u16) / 2) as u8,
            None => MAX_QP,
        };
        out.push(lo..=hi);
        lo = hi + 1;
    }
    Ok(out)
}

impl ModelBank {
    /// Builds a bank from `(trained_qp, weights)` pairs in any order.
    pub fn new(graph: NetworkGraph, mut models: Vec<(u8, WeightStore<f32>)>) -> Result<Self> {
        models.sort_by_key(|m| m.0);
        let qps: Vec<u8> = models.iter().map(|m| m.0).collect();
        let ranges = band_ranges(&qps)?;
        let bands = models
            .into_iter()
            .zip(ranges)
            .map(|((trained_qp, weights), qps)| {
                weights.validate(&graph)?;
                Ok(Band {
                    qps,
                    trained_qp,
                    weights,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { graph, bands })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_index(&self, qp: u8) -> usize {
        let qp = qp.min(MAX_QP);
        self.bands.iter().position(|b| b.qps.contains(&qp)).unwrap()
    }

    pub fn select(&self, qp: u8) -> &Band {
        &self.bands[self.band_index(qp)]
    }
}

/// Weights of the band containing `qp`.
pub fn select_model(bank: &ModelBank, qp: u8) -> &WeightStore<f32> {
    &bank.select(qp).weights
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::build_inception_filter;

    fn bank() -> ModelBank {
        let g = build_inception_filter(0);
        let models = [37u8, 22, 32, 27]
            .iter()
            .map(|&q| {
                let mut w = WeightStore::zeros(&g);
                w.get_mut("post").unwrap().bias[0] = q as f32;
                (q, w)
            })
            .collect();
        ModelBank::new(g, models).unwrap()
    }

    fn trained(b: &ModelBank, qp: u8) -> f32 {
        select_model(b, qp).get("post").unwrap().bias[0]
    }

    #[test]
    fn midpoint_bands() {
        assert_eq!(band_ranges(&[22, 27, 32, 37]).unwrap(), vec![0..=24, 25..=29, 30..=34, 35..=51]);
        let b = bank();
        for (qp, want) in [(22, 22.0), (37, 37.0), (24, 22.0), (25, 27.0), (0, 22.0), (51, 37.0), (30, 32.0)] {
            assert_eq!(trained(&b, qp), want, "qp {qp}");
        }
    }

    #[test]
    fn bands_cover_every_qp_once() {
        let b = bank();
        for qp in 0..=MAX_QP {
            assert_eq!(b.bands().iter().filter(|band| band.qps.contains(&qp)).count(), 1);
        }
    }

    #[test]
    fn rejects_unsorted_or_duplicate_qps() {
        assert!(band_ranges(&[22, 22]).is_err());
        assert!(band_ranges(&[]).is_err());
        assert!(band_ranges(&[60]).is_err());
    }
}
