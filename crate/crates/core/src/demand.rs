//! Upstream arrival profiles.

/// Arrival flow at the upstream boundary as a function of the interval.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandProfile {
    /// `max(floor, peak - slope * |k - k_peak|)`.
    Triangular {
        floor: f64,
        peak: f64,
        slope: f64,
        k_peak: f64,
    },
    /// Piecewise-linear through `(k, veh/h)` points sorted by `k`; held
    /// constant outside the first and last point.
    Breakpoints(Vec<(f64, f64)>),
}

impl DemandProfile {
    /// The morning-peak profile of the A13 experiments.
    pub fn rush_hour() -> Self {
        DemandProfile::Triangular {
            floor: 500.0,
            peak: 2400.0,
            slope: 7.04,
            k_peak: 540.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        DemandProfile::Breakpoints(vec![(0.0, value)])
    }

    pub fn at(&self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            DemandProfile::Triangular {
                floor,
                peak,
                slope,
                k_peak,
            } => floor.max(peak - slope * (k - k_peak).abs()),
            DemandProfile::Breakpoints(points) => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                let idx = points.partition_point(|(kk, _)| *kk <= k);
                if idx == 0 {
                    return first.1;
                }
                if idx == points.len() {
                    return points[idx - 1].1;
                }
                let (k0, v0) = points[idx - 1];
                let (k1, v1) = points[idx];
                if k == k0 {
                    return v0;
                }
                v0 + (v1 - v0) * (k - k0) / (k1 - k0)
            }
        }
    }

    /// Problems with the profile, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            DemandProfile::Triangular {
                floor,
                peak,
                slope,
                k_peak,
            } => {
                for (name, v) in [
                    ("floor", floor),
                    ("peak", peak),
                    ("slope", slope),
                    ("k_peak", k_peak),
                ] {
                    if !(v.is_finite() && *v >= 0.0) {
                        out.push(format!("{name} must be finite and non-negative, got {v}"));
                    }
                }
            }
            DemandProfile::Breakpoints(points) => {
                if points.is_empty() {
                    out.push("breakpoints must not be empty".into());
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    out.push("breakpoints must be strictly increasing in k".into());
                }
                if points
                    .iter()
                    .any(|(k, v)| !(*k >= 0.0 && v.is_finite() && *v >= 0.0))
                {
                    out.push("breakpoints need k >= 0 and non-negative values".into());
                }
            }
        }
        out
    }
}
