use crate::error::{Error, Result};

/// Learning rate for a zero-based `epoch`: `lr0` for the first
/// `constant` epochs, then a linear ramp reaching 0 at epoch
/// `constant + decay`.
pub fn lr_at_epoch(epoch: usize, lr0: f64, constant: usize, decay: usize) -> Result<f64> {
    if epoch > constant + decay {
        return Err(Error::invalid(format!(
            "epoch {epoch} is past the schedule end {}",
            constant + decay
        )));
    }
    if epoch < constant || decay == 0 {
        return Ok(lr0);
    }
    let progress = (epoch - constant) as f64 / decay as f64;
    Ok(lr0 * (1.0 - progress).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_schedule_points() {
        let lr = |e| lr_at_epoch(e, 2e-4, 100, 100).unwrap();
        assert_eq!(lr(0), 2e-4);
        assert_eq!(lr(99), 2e-4);
        assert_eq!(lr(100), 2e-4);
        assert!((lr(150) - 1e-4).abs() < 1e-12);
        assert!((lr(199) - 2e-6).abs() < 1e-12);
        assert_eq!(lr(200), 0.0);
        assert!(lr_at_epoch(201, 2e-4, 100, 100).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(c in 0usize..50, d in 1usize..50, lr0 in 1e-6f64..1.0) {
            let mut prev = f64::INFINITY;
            for e in 0..=c + d {
                let lr = lr_at_epoch(e, lr0, c, d).unwrap();
                prop_assert!(lr <= prev);
                prop_assert!((0.0..=lr0).contains(&lr));
                prev = lr;
            }
        }
    }
}
