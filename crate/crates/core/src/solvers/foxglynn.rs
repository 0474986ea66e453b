use super::SolverError;

/// A truncated, unnormalized Poisson weight window.
#[derive(Debug, Clone, PartialEq)]
pub struct FoxGlynn {
    pub left: usize,
    pub right: usize,
    /// `weights[k - left]` is proportional to the Poisson pmf at `k`.
    pub weights: Vec<f64>,
    pub total_weight: f64,
}

impl FoxGlynn {
    /// Normalized probability of `k` (zero outside the window).
    pub fn probability(&self, k: usize) -> f64 {
        if k < self.left || k > self.right {
            0.0
        } else {
            self.weights[k - self.left] / self.total_weight
        }
    }
}

/// Poisson weights for rate `lambda` covering all but `epsilon` of the mass.
/// Weights are anchored at the mode (weight 1) and computed outward by the
/// ratio recurrences, so nothing overflows; the window is grown until a
/// geometric bound on each remaining tail drops below `epsilon`.
pub fn fox_glynn(lambda: f64, epsilon: f64) -> Result<FoxGlynn, SolverError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SolverError::Invalid(format!("Poisson rate must be finite and non-negative, got {lambda}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SolverError::Invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if lambda == 0.0 {
        return Ok(FoxGlynn { left: 0, right: 0, weights: vec![1.0], total_weight: 1.0 });
    }
    let mode = lambda.floor() as usize;
    let mut lower: Vec<f64> = Vec::new(); // weights for mode-1, mode-2, ...
    let mut upper: Vec<f64> = vec![1.0]; // weights for mode, mode+1, ...
    let mut sum = 1.0;
    let mut left = mode;
    let mut right = mode;
    loop {
        // w(left-1) and the sum of everything below it, bounded geometrically
        let left_tail = if left == 0 {
            0.0
        } else {
            let w = lower.last().copied().unwrap_or(1.0) * left as f64 / lambda;
            let ratio = (left - 1) as f64 / lambda;
            w / (1.0 - ratio)
        };
        let right_tail = {
            let w = upper.last().copied().unwrap() * lambda / (right + 1) as f64;
            let ratio = lambda / (right + 2) as f64;
            w / (1.0 - ratio)
        };
        if left_tail + right_tail <= epsilon * sum {
            break;
        }
        let grow_left = left > 0 && left_tail >= right_tail;
        if grow_left {
            let w = lower.last().copied().unwrap_or(1.0) * left as f64 / lambda;
            lower.push(w);
            sum += w;
            left -= 1;
        } else {
            let w = upper.last().copied().unwrap() * lambda / (right + 1) as f64;
            upper.push(w);
            sum += w;
            right += 1;
        }
    }
    let mut weights: Vec<f64> = lower.into_iter().rev().collect();
    weights.extend(upper);
    // sum small weights first
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| weights[i].total_cmp(&weights[j]));
    let mut total: f64 = order.iter().map(|&i| weights[i]).sum();
    // keep the normalized mass at or below one after rounding
    while weights.iter().map(|w| w / total).sum::<f64>() > 1.0 {
        total = total.next_up();
    }
    Ok(FoxGlynn { left, right, weights, total_weight: total })
}
