use serde::{Deserialize, Serialize};

use super::mse::{monte_carlo_mse_pairs, pair_with_v, pair_with_z};
use crate::analytics::{analytic_mse_prf, analytic_mse_rff, SeriesControl};
use crate::blocks::CouplingScheme;
use crate::error::Result;
use crate::features::{FeatureMapKind, KernelPair};
use crate::rng::RngStream;
use crate::stats::MeanSe;

/// Monte Carlo MSE against its closed form at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureCheck {
    pub map: FeatureMapKind,
    pub scheme: CouplingScheme,
    pub d: usize,
    pub m: usize,
    /// `v` for PRFs, `z` for RFFs.
    pub arg: f64,
    pub analytic: f64,
    pub empirical: MeanSe,
}

impl ClosureCheck {
    pub fn z_score(&self) -> f64 {
        self.empirical.z_score(self.analytic)
    }

    pub fn passes(&self, n_se: f64) -> bool {
        self.empirical.within(self.analytic, n_se)
    }
}

/// Schemes with a closed-form MSE for `map`.
pub fn closed_form_schemes(map: FeatureMapKind) -> &'static [CouplingScheme] {
    match map {
        FeatureMapKind::Prf => &[CouplingScheme::IID, CouplingScheme::ORF, CouplingScheme::SIMRF],
        FeatureMapKind::Rff => &[CouplingScheme::IID, CouplingScheme::ORF],
    }
}

/// Compare simulated and analytic MSE with `m = d` for every closed-form
/// scheme of each map, at each `d` and each argument. All schemes at one `d`
/// share trial streams.
pub fn closure_suite(
    maps: &[FeatureMapKind],
    dims: &[usize],
    args: &[f64],
    trials: usize,
    stream: &RngStream,
    ctl: SeriesControl,
) -> Result<Vec<ClosureCheck>> {
    let mut out = Vec::new();
    for &map in maps {
        for &d in dims {
            let pairs: Vec<KernelPair> = args
                .iter()
                .map(|&a| match map {
                    FeatureMapKind::Prf => pair_with_v(d, a),
                    FeatureMapKind::Rff => pair_with_z(d, a),
                })
                .collect::<Result<_>>()?;
            let s = stream.derive(d as u64);
            for &scheme in closed_form_schemes(map) {
                let sims = monte_carlo_mse_pairs(&pairs, scheme, map, d, trials, &s)?;
                for (p, sim) in pairs.iter().zip(sims) {
                    let analytic = match map {
                        FeatureMapKind::Prf => {
                            analytic_mse_prf(scheme.kind, p.x_norm(), p.y_norm(), p.v(), d, d, ctl)?
                        }
                        FeatureMapKind::Rff => analytic_mse_rff(scheme.kind, p.z(), d, d, ctl)?,
                    };
                    out.push(ClosureCheck {
                        map,
                        scheme,
                        d,
                        m: d,
                        arg: match map {
                            FeatureMapKind::Prf => p.v(),
                            FeatureMapKind::Rff => p.z(),
                        },
                        analytic,
                        empirical: sim.squared_error,
                    });
                }
            }
        }
    }
    Ok(out)
}
