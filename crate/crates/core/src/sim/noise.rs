//! Measurement noise: Gaussian on position, velocity and rate, a small
//! body-frame rotation on attitude.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::SimState;
use crate::estimator::Measurement;
use crate::math::UnitQuaternion;

use super::config::SensorNoise;

#[derive(Debug, Clone)]
pub struct NoiseModel {
    sigma: SensorNoise,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    /// Independent stream per `(seed, stream)` pair.
    pub fn new(sigma: SensorNoise, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { sigma, rng }
    }

    fn gauss(&mut self, sd: f64) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for i in 0..3 {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            v[i] = sd * n;
        }
        v
    }

    /// Draws the same number of samples whatever the deviations, so the
    /// stream stays aligned across configurations.
    pub fn measure(&mut self, truth: &SimState) -> Measurement {
        let s = self.sigma;
        let dp = self.gauss(s.position);
        let dv = self.gauss(s.velocity);
        let de = self.gauss(s.attitude);
        let dw = self.gauss(s.angular_rate);
        let attitude = if s.attitude == 0.0 {
            truth.attitude
        } else {
            truth.attitude * UnitQuaternion::from_rotation_vector(&de)
        };
        Measurement {
            position: truth.position + dp,
            velocity: truth.velocity + dv,
            attitude,
            angular_rate: truth.angular_rate + dw,
        }
    }
}
