use crate::cfr::{occupied_runs, CfrTensor};
use crate::error::{Error, Result};
use crate::estimators::{FullGridEstimate, Method};
use crate::grid::CarrierGrid;

/// Linear interpolation from pilot to all subcarriers of each occupied
/// run. Subcarriers beyond the outermost pilots of a run hold the nearest
/// pilot value; subcarriers outside every run stay zero and unoccupied.
pub fn interpolate_freq(
    pilot_estimates: &CfrTensor,
    mask: &[bool],
    grid: &CarrierGrid,
    method: Method,
) -> Result<FullGridEstimate> {
    let n_p = grid.n_pilots();
    if pilot_estimates.n_p() != n_p || mask.len() != n_p {
        return Err(Error::Shape(format!(
            "pilot estimates have {} pilots and mask {}, grid has {n_p}",
            pilot_estimates.n_p(),
            mask.len()
        )));
    }
    let comb = grid.comb();
    let mut full = FullGridEstimate::zeros(pilot_estimates.n_sym(), grid.n_subcarriers(), pilot_estimates.n_ant(), method);
    let runs = occupied_runs(mask);
    for run in &runs {
        if run.len() < 2 && comb > 1 {
            return Err(Error::Estimation(format!(
                "run starting at pilot {} has a single pilot; interpolation needs two",
                run.start
            )));
        }
        let first_sc = grid.pilot_subcarrier(run.start);
        let last_sc = grid.pilot_subcarrier(run.end - 1) + comb - 1;
        for sc in first_sc..=last_sc {
            full.occupied[sc] = true;
        }
        for i in 0..pilot_estimates.n_sym() {
            for j in 0..pilot_estimates.n_ant() {
                for sc in first_sc..=last_sc {
                    let pos = sc / comb;
                    let frac = (sc % comb) as f64 / comb as f64;
                    let v = if frac == 0.0 {
                        pilot_estimates[(i, pos, j)]
                    } else if pos + 1 < run.end {
                        let a = pilot_estimates[(i, pos, j)];
                        let b = pilot_estimates[(i, pos + 1, j)];
                        a + (b - a) * frac
                    } else {
                        pilot_estimates[(i, run.end - 1, j)]
                    };
                    full.set(i, sc, j, v);
                }
            }
        }
    }
    Ok(full)
}
