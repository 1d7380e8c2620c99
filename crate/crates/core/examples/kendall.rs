//! Kendall tau-b and tau-c on a small table with ties.

use simvec_metric::eval::{kendall_tau_b, kendall_tau_c, pair_counts};

fn main() -> simvec_metric::Result<()> {
    let metric = [0.91, 0.40, 0.40, 0.75, 0.12, 0.66, 0.30, 0.88];
    let human = [1.00, 0.25, 0.50, 0.75, 0.00, 0.75, 0.25, 1.00];
    let c = pair_counts(&metric, &human)?;
    println!(
        "concordant {}  discordant {}  ties x-only {}  y-only {}  both {}",
        c.concordant, c.discordant, c.ties_x_only, c.ties_y_only, c.ties_both
    );
    println!("tau_b {:.4}", kendall_tau_b(&metric, &human)?);
    println!(
        "tau_c {:.4}  (m = {})",
        kendall_tau_c(&metric, &human)?,
        c.distinct_x.min(c.distinct_y)
    );
    Ok(())
}
