use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance-based utility of a worker's answer to a task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub enum UtilityModel {
    /// 1 inside the task disk, 0 outside.
    #[default]
    Binary,
    /// Decreases linearly from 1 at the task location to 0 at the radius.
    Linear,
    /// `(1 + bin)^-skew` where `bin = floor(bins * d / r)`.
    Zipf { skew: f64, bins: u32 },
}

impl UtilityModel {
    pub fn zipf(skew: f64) -> Self {
        UtilityModel::Zipf { skew, bins: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityModel::Zipf { skew, bins } if !(skew > 0.0 && skew.is_finite()) || bins == 0 => Err(
                Error::InvalidModel(format!("zipf utility needs skew > 0 and bins >= 1, got s={skew}, B={bins}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilityModel::Binary => "binary",
            UtilityModel::Linear => "linear",
            UtilityModel::Zipf { .. } => "zipf",
        }
    }
}

/// `f(distance)` for a task of the given radius, in `[0, 1]`.
pub fn task_utility(model: &UtilityModel, distance: f64, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidModel(format!("radius must be positive, got {radius}")));
    }
    if distance > radius {
        return Ok(0.0);
    }
    let d = distance.max(0.0);
    Ok(match *model {
        UtilityModel::Binary => 1.0,
        UtilityModel::Linear => (1.0 - d / radius).max(0.0),
        UtilityModel::Zipf { skew, bins } => {
            let bin = (bins as f64 * d / radius).floor();
            (1.0 + bin).powf(-skew)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_endpoints() {
        assert_eq!(task_utility(&UtilityModel::Linear, 0.0, 5.0).unwrap(), 1.0);
        assert_eq!(task_utility(&UtilityModel::Linear, 5.0, 5.0).unwrap(), 0.0);
        assert_eq!(task_utility(&UtilityModel::Linear, 6.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn binary_boundary_inclusive() {
        assert_eq!(task_utility(&UtilityModel::Binary, 5.0, 5.0).unwrap(), 1.0);
        assert_eq!(task_utility(&UtilityModel::Binary, 5.000001, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn zipf_quarter_radius_is_third() {
        let u = task_utility(&UtilityModel::zipf(1.0), 1.25, 5.0).unwrap();
        assert!((u - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(task_utility(&UtilityModel::zipf(1.0), 0.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn non_positive_radius_rejected() {
        assert!(matches!(
            task_utility(&UtilityModel::Binary, 0.0, 0.0),
            Err(Error::InvalidModel(_))
        ));
    }
}
