use super::{lit, Scalar, SimError};

/// Time to collision in seconds; `+inf` when not closing in.
pub fn ttc_calculate<T: Scalar>(distance: T, relative_speed: T) -> Result<T, SimError> {
    if distance < T::zero() || distance.is_nan() {
        return Err(SimError::NegativeDistance(distance.to_f64().unwrap_or(f64::NAN)));
    }
    if relative_speed > T::zero() {
        Ok(distance / relative_speed)
    } else {
        Ok(T::infinity())
    }
}

/// Normalized brake force: full below 1 s, linear ramp to zero at 2 s.
pub fn braking_decision<T: Scalar>(ttc: T) -> T {
    let one = T::one();
    let two: T = lit(2.0);
    if ttc < one {
        one
    } else if ttc < two {
        two - ttc
    } else {
        T::zero()
    }
}
