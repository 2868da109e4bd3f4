//! Seeded multi-impression corpora built from the ridge generator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{save_pgm, synthesize_fingerprint, write_ground_truth, Dislocation, SyntheticSpec};
use crate::error::Result;
use crate::geometry::RigidTransform;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub fingers: usize,
    pub impressions: usize,
    pub width: usize,
    pub height: usize,
    pub freq_range: (f64, f64),
    pub dislocation_range: (usize, usize),
    /// Minimum spacing between planted dislocations, pixels.
    pub min_separation: f64,
    /// Dislocations are planted at least this far from the border.
    pub margin: f64,
    /// Bounds on the perturbation of impressions 1.. relative to impression 0.
    pub max_rotation: f64,
    pub max_translation: f64,
    pub max_noise: f64,
    /// Noise of the first (template) impression.
    pub template_noise: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            fingers: 50,
            impressions: 5,
            width: 256,
            height: 256,
            freq_range: (0.08, 0.12),
            dislocation_range: (8, 12),
            min_separation: 36.0,
            margin: 28.0,
            max_rotation: 10.0,
            max_translation: 12.0,
            max_noise: 20.0,
            template_noise: 8.0,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Impression {
    pub spec: SyntheticSpec,
    /// Maps the finger's master frame into this impression.
    pub transform: RigidTransform,
}

#[derive(Debug, Clone)]
pub struct SyntheticFinger {
    pub id: String,
    pub master: SyntheticSpec,
    pub impressions: Vec<Impression>,
}

impl CorpusParams {
    pub fn generate(&self) -> Vec<SyntheticFinger> {
        (0..self.fingers).map(|f| self.finger(f)).collect()
    }

    fn finger(&self, index: usize) -> SyntheticFinger {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let (w, h) = (self.width as f64, self.height as f64);
        let (fmin, fmax) = self.freq_range;
        let ridge_frequency = if fmax > fmin {
            rng.random_range(fmin..fmax)
        } else {
            fmin
        };
        let base_orientation = rng.random_range(0.0..180.0);
        let (nmin, nmax) = self.dislocation_range;
        let target = rng.random_range(nmin..=nmax.max(nmin));
        let mut dislocations: Vec<Dislocation> = Vec::new();
        let mut attempts = 0;
        while dislocations.len() < target && attempts < 10_000 {
            attempts += 1;
            let x = rng.random_range(self.margin..(w - 1.0 - self.margin)).round();
            let y = rng.random_range(self.margin..(h - 1.0 - self.margin)).round();
            let spaced = dislocations
                .iter()
                .all(|d| (d.x - x).hypot(d.y - y) >= self.min_separation);
            let sign = if rng.random_bool(0.5) { 1 } else { -1 };
            if spaced {
                dislocations.push(Dislocation { x, y, sign });
            }
        }
        let master = SyntheticSpec {
            width: self.width,
            height: self.height,
            ridge_frequency,
            base_orientation,
            dislocations,
            noise_std: 0.0,
            rng_seed: rng.random(),
        };
        let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
        let impressions = (0..self.impressions)
            .map(|i| {
                let (transform, noise) = if i == 0 {
                    (RigidTransform::IDENTITY, self.template_noise)
                } else {
                    let rot = rng.random_range(-self.max_rotation..=self.max_rotation);
                    let r = self.max_translation * rng.random::<f64>().sqrt();
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    let noise = rng.random_range(0.0..=self.max_noise);
                    (RigidTransform::about(cx, cy, rot, r * a.cos(), r * a.sin()), noise)
                };
                let seed = rng.random();
                Impression {
                    spec: perturb(&master, &transform, noise, seed),
                    transform,
                }
            })
            .collect();
        SyntheticFinger {
            id: format!("f{index:03}"),
            master,
            impressions,
        }
    }

    /// Writes `dir/<finger>/<impression>.pgm`, ground-truth `.gt` files and
    /// `dir/manifest.txt` (impression 0 is the template, the last impression
    /// the designated impostor probe).
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<SyntheticFinger>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let fingers = self.generate();
        let mut manifest = String::new();
        for finger in &fingers {
            let fdir = dir.join(&finger.id);
            fs::create_dir_all(&fdir)?;
            for (i, imp) in finger.impressions.iter().enumerate() {
                let (img, truth) = synthesize_fingerprint(&imp.spec)?;
                save_pgm(&img, fdir.join(format!("{i:02}.pgm")))?;
                write_ground_truth(&truth, fdir.join(format!("{i:02}.gt")))?;
            }
            writeln!(
                manifest,
                "{} template={:02} impostor={:02}",
                finger.id,
                0,
                finger.impressions.len().saturating_sub(1)
            )
            .unwrap();
        }
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(fingers)
    }
}

/// Applies a rigid motion to a master spec. Dislocations that leave the
/// frame (with a 4 px guard band) are dropped.
pub fn perturb(
    master: &SyntheticSpec,
    transform: &RigidTransform,
    noise_std: f64,
    rng_seed: u64,
) -> SyntheticSpec {
    let (w, h) = (master.width as f64, master.height as f64);
    let dislocations = master
        .dislocations
        .iter()
        .filter_map(|d| {
            let (x, y) = transform.apply(d.x, d.y);
            let inside = x >= 4.0 && y >= 4.0 && x <= w - 5.0 && y <= h - 5.0;
            inside.then_some(Dislocation { x, y, sign: d.sign })
        })
        .collect();
    SyntheticSpec {
        base_orientation: master.base_orientation + transform.rot,
        dislocations,
        noise_std,
        rng_seed,
        ..master.clone()
    }
}
