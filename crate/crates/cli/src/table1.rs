//! Derived channel-occupancy times next to the published reference values.

use std::fmt::Write as _;

use dcf_core::timing::{TABLE1_REFERENCE, TABLE1_TOLERANCE_US};
use dcf_core::{AccessMode, MacTimingParams};

/// Renders the table. Reference columns and PASS/FAIL only appear for the
/// default parameters; the second value is `Some(all passed)` in that case.
pub fn render(params: &MacTimingParams) -> (String, Option<bool>) {
    let compare = *params == MacTimingParams::default();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "phy_overhead_us={} payload_airtime_us={:.4} sigma_us={}",
        params.phy_overhead(),
        params.payload_airtime(),
        params.slot_sigma
    );
    if compare {
        let _ = writeln!(
            out,
            "{:<7} {:>10} {:>10} {:>10} {:>9} {:>9} {:>7} {:>7}",
            "mode", "t_s_us", "t_c_us", "t_e_us", "ref_t_s", "ref_t_c", "chk_t_s", "chk_t_c"
        );
    } else {
        let _ = writeln!(out, "{:<7} {:>10} {:>10} {:>10}", "mode", "t_s_us", "t_c_us", "t_e_us");
    }
    let mut all_pass = true;
    for mode in AccessMode::ALL {
        let t = params.channel_times(mode);
        let _ = write!(out, "{:<7} {:>10.4} {:>10.4} {:>10.4}", mode, t.t_s, t.t_c, t.t_e);
        if compare {
            let (_, ref_s, ref_c) = TABLE1_REFERENCE
                .iter()
                .copied()
                .find(|(m, _, _)| *m == mode)
                .expect("reference for every mode");
            let pass_s = (t.t_s - ref_s).abs() <= TABLE1_TOLERANCE_US;
            let pass_c = (t.t_c - ref_c).abs() <= TABLE1_TOLERANCE_US;
            all_pass &= pass_s && pass_c;
            let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
            let _ = write!(
                out,
                " {:>9.1} {:>9.1} {:>7} {:>7}",
                ref_s,
                ref_c,
                verdict(pass_s),
                verdict(pass_c)
            );
        }
        out.push('\n');
    }
    (out, compare.then_some(all_pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass() {
        let (text, pass) = render(&MacTimingParams::default());
        assert_eq!(pass, Some(true));
        assert_eq!(text.matches("PASS").count(), 4);
    }

    #[test]
    fn other_rates_skip_the_comparison() {
        let p = MacTimingParams {
            channel_rate: 22.0,
            ..Default::default()
        };
        let (text, pass) = render(&p);
        assert_eq!(pass, None);
        assert!(!text.contains("PASS"));
    }
}
