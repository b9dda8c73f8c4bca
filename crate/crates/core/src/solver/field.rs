//! Sampled rotation fields on the rod network.
//!
//! Each rod carries node rotations at uniformly spaced arclength nodes.
//! The junction constraint (all rods see the same junction rotation) is
//! enforced by construction: rod `i`'s node 0 is never stored, it is
//! defined as `R_J * Q_i` where `R_J` is the single shared junction
//! rotation. Every iterate therefore satisfies the constraint exactly.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Network;
use crate::rot;
use crate::{Error, Result};

/// Rotation field: one shared junction rotation plus per-rod interior/end
/// node rotations (indices 1..=N per rod).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationField {
    pub junction: UnitQuaternion<f64>,
    /// `nodes[i][k-1]` is rod `i`'s rotation at node `k` for `k = 1..=N_i`.
    pub nodes: Vec<Vec<UnitQuaternion<f64>>>,
}

/// Material strains at segment midpoints: rotation vector of
/// `R_k^T R_{k+1}` divided by the segment length.
#[derive(Debug, Clone)]
pub struct StrainField {
    pub strains: Vec<Vec<Vector3<f64>>>,
}

impl RotationField {
    /// Straight (zero-strain) field: junction at identity, every node at
    /// the rod's reference frame.
    pub fn straight(network: &Network, segments: &[usize]) -> Self {
        RotationField {
            junction: UnitQuaternion::identity(),
            nodes: network
                .rods
                .iter()
                .zip(segments)
                .map(|(rod, &n)| vec![rod.frame; n])
                .collect(),
        }
    }

    /// Straight field plus per-node right-multiplied random rotations of
    /// the given amplitude (uniform componentwise in [-amp, amp]),
    /// deterministic in the seed. The junction rotation is perturbed too.
    pub fn perturbed(network: &Network, segments: &[usize], seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> UnitQuaternion<f64> {
            let v = Vector3::new(
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
            ) * amplitude;
            rot::exp(&v)
        };
        let junction = UnitQuaternion::identity() * draw(&mut rng);
        let nodes = network
            .rods
            .iter()
            .zip(segments)
            .map(|(rod, &n)| (0..n).map(|_| rod.frame * draw(&mut rng)).collect())
            .collect();
        RotationField { junction, nodes }
    }

    pub fn segments(&self, rod: usize) -> usize {
        self.nodes[rod].len()
    }

    /// Rod `i`'s rotation at node `k`; node 0 is the derived junction
    /// value `R_J * Q_i`.
    pub fn node(&self, network: &Network, rod: usize, k: usize) -> UnitQuaternion<f64> {
        if k == 0 {
            self.junction * network.rods[rod].frame
        } else {
            self.nodes[rod][k - 1]
        }
    }

    /// Materialized node rotations of one rod (including the derived
    /// node 0), as written to output files.
    pub fn rod_nodes(&self, network: &Network, rod: usize) -> Vec<UnitQuaternion<f64>> {
        let mut out = Vec::with_capacity(self.nodes[rod].len() + 1);
        out.push(self.junction * network.rods[rod].frame);
        out.extend_from_slice(&self.nodes[rod]);
        out
    }

    pub fn check_shape(&self, network: &Network) -> Result<()> {
        if self.nodes.len() != network.num_rods() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} rods, network has {}",
                self.nodes.len(),
                network.num_rods()
            )));
        }
        if let Some((i, _)) = self
            .nodes
            .iter()
            .enumerate()
            .find(|(_, nodes)| nodes.len() < 2)
        {
            return Err(Error::ShapeMismatch(format!(
                "rod {i} has fewer than 2 segments"
            )));
        }
        Ok(())
    }

    /// Number of tangent degrees of freedom: 3 per stored node plus 3 for
    /// the junction.
    pub fn tangent_dim(&self) -> usize {
        3 * (1 + self.nodes.iter().map(Vec::len).sum::<usize>())
    }

    /// Left-multiplicative retraction `R <- exp(t * delta) R` applied to
    /// the junction and every stored node; quaternions are renormalized.
    pub fn retract(&self, delta: &[f64], t: f64) -> RotationField {
        debug_assert_eq!(delta.len(), self.tangent_dim());
        let take = |off: usize| Vector3::new(delta[off], delta[off + 1], delta[off + 2]) * t;
        let mut junction = rot::exp(&take(0)) * self.junction;
        rot::renormalize(&mut junction);
        let mut off = 3;
        let nodes = self
            .nodes
            .iter()
            .map(|rod_nodes| {
                rod_nodes
                    .iter()
                    .map(|q| {
                        let mut r = rot::exp(&take(off)) * q;
                        rot::renormalize(&mut r);
                        off += 3;
                        r
                    })
                    .collect()
            })
            .collect();
        RotationField { junction, nodes }
    }

    /// Material strain vectors at segment midpoints.
    pub fn strain_field(&self, network: &Network) -> StrainField {
        let strains = network
            .rods
            .iter()
            .enumerate()
            .map(|(i, rod)| {
                let n = self.segments(i);
                let h = rod.length / n as f64;
                let mut prev = self.node(network, i, 0);
                (1..=n)
                    .map(|k| {
                        let next = self.node(network, i, k);
                        let v = rot::log(&(prev.inverse() * next));
                        prev = next;
                        v / h
                    })
                    .collect()
            })
            .collect();
        StrainField { strains }
    }

    /// Largest geodesic distance to another field over all nodes
    /// (including the derived junction nodes).
    pub fn max_distance(&self, other: &RotationField, network: &Network) -> f64 {
        let mut d = rot::distance(&self.junction, &other.junction);
        for i in 0..self.nodes.len() {
            for k in 0..=self.segments(i) {
                d = d.max(rot::distance(
                    &self.node(network, i, k),
                    &other.node(network, i, k),
                ));
            }
        }
        d
    }
}
