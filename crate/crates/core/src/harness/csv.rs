use super::BerRecord;

pub const CSV_HEADER: &str = "ebn0_db,frames,bits,bit_errors,ber,mean_iterations,converged_fraction";

/// One CSV row; BER in scientific notation with 6 significant digits.
pub fn format_record(r: &BerRecord) -> String {
    format!(
        "{},{},{},{},{:.5e},{:.6},{:.6}",
        r.ebn0_db, r.frames_run, r.bits_transmitted, r.bit_errors, r.ber, r.mean_iterations, r.converged_fraction
    )
}
