//! Topic-by-topic correlation across users.

use serde::Serialize;
use thiserror::Error;

use crate::profiling::{Mechanism, UserProfile};
use crate::topics::{Topic, TOPIC_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("correlation needs at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    HighPositive,
    Positive,
    Negative,
    HighNegative,
    Undefined,
}

impl Band {
    /// (0.5, 1] high-positive, (0, 0.5] positive, [-0.5, 0] negative,
    /// [-1, -0.5) high-negative.
    pub fn of(rho: Option<f64>) -> Band {
        match rho {
            None => Band::Undefined,
            Some(r) if r > 0.5 => Band::HighPositive,
            Some(r) if r > 0.0 => Band::Positive,
            Some(r) if r >= -0.5 => Band::Negative,
            Some(_) => Band::HighNegative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::HighPositive => "high-positive",
            Band::Positive => "positive",
            Band::Negative => "negative",
            Band::HighNegative => "high-negative",
            Band::Undefined => "undefined",
        }
    }
}

pub type TopicMatrix<T> = [[T; TOPIC_COUNT]; TOPIC_COUNT];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    /// `None` where either column has zero variance.
    pub rho: TopicMatrix<Option<f64>>,
    pub bands: TopicMatrix<Band>,
}

/// Users x topics score table for the chosen mechanism.
pub fn score_columns(profiles: &[UserProfile], mechanism: Mechanism) -> Vec<[f64; TOPIC_COUNT]> {
    profiles.iter().map(|p| p.vector(mechanism).scores).collect()
}

/// Sample Pearson coefficients between topic score columns, computed in two
/// passes (means, then centered cross products).
pub fn pearson_matrix(profiles: &[UserProfile], mechanism: Mechanism) -> Result<CorrelationMatrix, CorrelationError> {
    if profiles.len() < 2 {
        return Err(CorrelationError::TooFewProfiles(profiles.len()));
    }
    Ok(pearson_from_rows(&score_columns(profiles, mechanism)))
}

pub(crate) fn pearson_from_rows(rows: &[[f64; TOPIC_COUNT]]) -> CorrelationMatrix {
    let n = rows.len() as f64;
    let mut means = [0.0; TOPIC_COUNT];
    for row in rows {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    // Constant columns are detected exactly; centering them can leave
    // rounding residue that would otherwise read as variance.
    let constant: Vec<bool> = (0..TOPIC_COUNT)
        .map(|j| rows.iter().all(|r| r[j] == rows[0][j]))
        .collect();
    let centered: Vec<[f64; TOPIC_COUNT]> = rows
        .iter()
        .map(|r| std::array::from_fn(|j| r[j] - means[j]))
        .collect();

    let mut rho = [[None; TOPIC_COUNT]; TOPIC_COUNT];
    for i in 0..TOPIC_COUNT {
        if constant[i] {
            continue;
        }
        for j in i..TOPIC_COUNT {
            if constant[j] {
                continue;
            }
            let value = if i == j {
                1.0
            } else {
                let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
                for c in &centered {
                    sxy += c[i] * c[j];
                    sxx += c[i] * c[i];
                    syy += c[j] * c[j];
                }
                (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
            };
            rho[i][j] = Some(value);
            rho[j][i] = Some(value);
        }
    }
    let bands = rho.map(|row| row.map(Band::of));
    CorrelationMatrix { rho, bands }
}

/// Jaccard-style co-interest ratio: users with both scores at least `tau`
/// over users with either; 0/0 reads as 0.
pub fn co_interest_matrix(profiles: &[UserProfile], mechanism: Mechanism, tau: f64) -> TopicMatrix<f64> {
    let interested: Vec<[bool; TOPIC_COUNT]> = profiles
        .iter()
        .map(|p| p.vector(mechanism).scores.map(|s| s >= tau))
        .collect();
    let mut m = [[0.0; TOPIC_COUNT]; TOPIC_COUNT];
    for i in 0..TOPIC_COUNT {
        for j in 0..TOPIC_COUNT {
            let both = interested.iter().filter(|u| u[i] && u[j]).count();
            let either = interested.iter().filter(|u| u[i] || u[j]).count();
            m[i][j] = if either == 0 { 0.0 } else { both as f64 / either as f64 };
        }
    }
    m
}

/// Row-per-topic table with a leading label column.
pub fn matrix_rows<T, F: Fn(&T) -> String>(m: &TopicMatrix<T>, cell: F) -> Vec<Vec<String>> {
    Topic::all()
        .map(|t| {
            std::iter::once(t.name().to_string())
                .chain(m[t.index()].iter().map(&cell))
                .collect()
        })
        .collect()
}
