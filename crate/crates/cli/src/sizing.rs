//! `pseudoaka sizing`: pool capacity planning.
//!
//! Rejection sampling against a pool at occupancy ρ needs 1/(1−ρ) draws in
//! expectation, and each subscriber pins down at most |P_HN| + 3 values
//! (three slots plus the retired set). These two numbers size the decimal
//! pseudonym space for a target population.

use clap::Args;
use pseudoaka_core::PseudonymPool;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::verbosity;

#[derive(Debug, Args)]
pub struct SizingArgs {
    /// Target pool occupancy in [0, 1).
    #[arg(long)]
    pub occupancy: f64,
    /// Mean retired-set size per subscriber.
    #[arg(long, default_value_t = 10.0)]
    pub avg_phn: f64,
    /// Also measure allocation tries empirically at the target occupancy.
    #[arg(long, default_value_t = false)]
    pub validate: bool,
    /// Number of allocate/release cycles for --validate.
    #[arg(long, default_value_t = 10_000)]
    pub draws: u64,
    /// Pool size in decimal digits for --validate.
    #[arg(long, default_value_t = 4)]
    pub pool_digits: u32,
    /// RNG seed for --validate.
    #[arg(long, default_value_t = 99)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SizingError {
    #[error("occupancy must be in [0, 1), got {0}")]
    Occupancy(f64),
    #[error("avg-phn must be finite and non-negative, got {0}")]
    AvgPhn(f64),
}

/// Expected uniform draws until an unallocated value: 1/(1-occupancy).
pub fn expected_tries(occupancy: f64) -> Result<f64, SizingError> {
    if !occupancy.is_finite() || !(0.0..1.0).contains(&occupancy) {
        return Err(SizingError::Occupancy(occupancy));
    }
    Ok(1.0 / (1.0 - occupancy))
}

/// Per-subscriber footprint: three slots plus the mean retired-set size.
pub fn footprint_factor(avg_phn: f64) -> Result<f64, SizingError> {
    if !avg_phn.is_finite() || avg_phn < 0.0 {
        return Err(SizingError::AvgPhn(avg_phn));
    }
    Ok(avg_phn + 3.0)
}

/// Fills a fresh pool to `occupancy`, then measures the mean number of
/// random probes per successful allocation over `draws` allocate/release
/// cycles (so occupancy stays fixed throughout).
pub fn measure_tries(pool_digits: u32, occupancy: f64, draws: u64, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pool = PseudonymPool::new(pool_digits);
    let space = pool.space();
    let target = ((space as f64) * occupancy).round() as u64;
    for _ in 0..target {
        pool.allocate(&mut rng).expect("prefill below capacity");
    }
    pool.tries_total = 0;
    pool.allocations = 0;
    for _ in 0..draws {
        let (v, _) = pool.allocate(&mut rng).expect("pool below capacity");
        pool.release(v);
    }
    pool.tries_total as f64 / pool.allocations as f64
}

pub fn cmd_sizing(args: &SizingArgs) -> i32 {
    let tries = match expected_tries(args.occupancy) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("pseudoaka sizing: {e}");
            return 2;
        }
    };
    let factor = match footprint_factor(args.avg_phn) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("pseudoaka sizing: {e}");
            return 2;
        }
    };
    println!("occupancy {}", args.occupancy);
    println!("expected allocation tries {tries}");
    println!("avg retired-set size {}", args.avg_phn);
    println!("pool footprint factor {factor}");
    if args.validate {
        if args.draws == 0 {
            eprintln!("pseudoaka sizing: --draws must be positive");
            return 2;
        }
        let measured = measure_tries(args.pool_digits, args.occupancy, args.draws, args.seed);
        println!(
            "measured allocation tries {measured} ({} draws, {} digits, seed {})",
            args.draws, args.pool_digits, args.seed
        );
        if verbosity() >= 2 {
            eprintln!(
                "pseudoaka sizing: |measured - expected| = {}",
                (measured - tries).abs()
            );
        }
    }
    0
}
