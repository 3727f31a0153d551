//! Published Monte Carlo means that reproduction runs are compared against,
//! ordered proposed, naive, pace.

pub struct CaseRow {
    pub case_id: u8,
    pub mean_sse: [f64; 3],
    pub cov_sse: [f64; 3],
    pub noise_sse: [f64; 3],
    pub snr_sse: [f64; 3],
}

pub const SURFACES: [CaseRow; 5] = [
    CaseRow {
        case_id: 1,
        mean_sse: [0.11, 0.61, 0.67],
        cov_sse: [2.25, 2.24, 3.79],
        noise_sse: [2.59, 0.31, 0.57],
        snr_sse: [7.08, 4.70, 13.02],
    },
    CaseRow {
        case_id: 2,
        mean_sse: [0.14, 0.65, 0.71],
        cov_sse: [1.68, 8.83, 8.00],
        noise_sse: [0.05, 0.02, 0.00],
        snr_sse: [0.12, 0.30, 0.34],
    },
    CaseRow {
        case_id: 3,
        mean_sse: [0.11, 0.63, 0.69],
        cov_sse: [1.80, 4.08, 4.75],
        noise_sse: [0.40, 0.10, 0.12],
        snr_sse: [1.17, 1.91, 3.84],
    },
    CaseRow {
        case_id: 4,
        mean_sse: [0.15, 0.65, 0.71],
        cov_sse: [1.74, 8.74, 8.00],
        noise_sse: [0.05, 0.02, 0.01],
        snr_sse: [0.13, 0.31, 0.36],
    },
    CaseRow {
        case_id: 5,
        mean_sse: [0.04, 0.13, 0.19],
        cov_sse: [0.16, 0.44, 0.24],
        noise_sse: [0.01, 0.01, 0.00],
        snr_sse: [0.25, 0.36, 0.67],
    },
];

/// Continuous-response mean squared error.
pub const GFLM_MSE: [f64; 3] = [0.89, 0.89, 0.96];
/// Binary-response classification accuracy.
pub const GFLM_ACCURACY: [f64; 3] = [0.8044, 0.8251, 0.7951];

impl CaseRow {
    pub fn metric(&self, name: &str) -> Option<[f64; 3]> {
        match name {
            "mean_sse" => Some(self.mean_sse),
            "cov_sse" => Some(self.cov_sse),
            "noise_sse" => Some(self.noise_sse),
            "snr_sse" => Some(self.snr_sse),
            _ => None,
        }
    }
}

/// Rank of each entry (0 = smallest, or largest when `higher_is_better`);
/// ties share the lower rank.
pub fn ranks(values: &[f64], higher_is_better: bool) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            values
                .iter()
                .filter(|&&w| if higher_is_better { w > v } else { w < v })
                .count()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_with_ties() {
        assert_eq!(ranks(&[0.3, 0.1, 0.2], false), vec![2, 0, 1]);
        assert_eq!(ranks(&[0.05, 0.02, 0.00], false), vec![2, 1, 0]);
        assert_eq!(ranks(&[0.01, 0.01, 0.00], false), vec![1, 1, 0]);
        assert_eq!(ranks(&[0.8, 0.82, 0.79], true), vec![1, 0, 2]);
    }
}
