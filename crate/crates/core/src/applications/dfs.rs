//! Two showdown entries: five flex players and one captain each, drawn from
//! the players of two teams.

use super::{random_psd, stream, AppError, Stream};
use crate::gaussian::GaussianVector;
use crate::model::{FeasibleRegion, InstanceMeta, LinearConstraint, ProblemInstance, Relation, Sense};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const FLEX: usize = 5;
pub const CAPTAIN_SCALE: f64 = 1.5;
pub const DEFAULT_MIN_SCORE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfsSpec {
    pub n_players: usize,
    /// Team of each player, `1` or `2`.
    pub team_of: Vec<u8>,
    /// Players projected below this are dropped by [`dfs_instance`].
    pub min_score_filter: f64,
}

impl DfsSpec {
    pub fn new(team_of: Vec<u8>) -> Self {
        Self { n_players: team_of.len(), team_of, min_score_filter: DEFAULT_MIN_SCORE }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.team_of.len() != self.n_players {
            return Err(AppError::Spec(format!("{} team labels for {} players", self.team_of.len(), self.n_players)));
        }
        if let Some(t) = self.team_of.iter().find(|&&t| t != 1 && t != 2) {
            return Err(AppError::Spec(format!("team label {t} not in {{1, 2}}")));
        }
        for t in [1, 2] {
            if !self.team_of.contains(&t) {
                return Err(AppError::Spec(format!("team {t} has no players")));
            }
        }
        if self.n_players < FLEX + 1 {
            return Err(AppError::Spec(format!("{} players, need at least {}", self.n_players, FLEX + 1)));
        }
        Ok(())
    }
}

/// Components `0..n'` are flex versions and `n'..2n'` captain versions of the
/// same players. Per entry: five flex, one captain, no player twice, and at
/// least one player from each team.
pub fn dfs_region(spec: &DfsSpec) -> Result<FeasibleRegion, AppError> {
    spec.validate()?;
    let p = spec.n_players;
    let mut rows = Vec::new();
    for i in 0..2 {
        rows.push(LinearConstraint::new((0..p).map(|j| (i, j, 1.0)), Relation::Eq, FLEX as f64));
        rows.push(LinearConstraint::new((p..2 * p).map(|j| (i, j, 1.0)), Relation::Eq, 1.0));
        for j in 0..p {
            rows.push(LinearConstraint::new([(i, j, 1.0), (i, j + p, 1.0)], Relation::Le, 1.0));
        }
        for t in [1, 2] {
            let members = (0..p).filter(|&j| spec.team_of[j] == t);
            rows.push(LinearConstraint::new(members.flat_map(|j| [(i, j, 1.0), (i, j + p, 1.0)]), Relation::Ge, 1.0));
        }
    }
    Ok(FeasibleRegion::new(2 * p, rows)?)
}

/// Builds the instance from flex-version projections. Players below the
/// score filter are dropped first; captain means are 1.5 times flex means
/// and captain covariances scale bilinearly.
pub fn dfs_instance(spec: &DfsSpec, mu: &[f64], sigma: &[f64]) -> Result<ProblemInstance, AppError> {
    spec.validate()?;
    let p = spec.n_players;
    if mu.len() != p || sigma.len() != p * p {
        return Err(AppError::Spec("projection sizes do not match the player count".into()));
    }
    let kept: Vec<usize> = (0..p).filter(|&j| mu[j] >= spec.min_score_filter).collect();
    let filtered = DfsSpec { n_players: kept.len(), team_of: kept.iter().map(|&j| spec.team_of[j]).collect(), min_score_filter: spec.min_score_filter };
    filtered.validate().map_err(|e| AppError::Precondition(format!("after the score filter: {e}")))?;
    let q = kept.len();
    let scale = |a: usize| if a < q { 1.0 } else { CAPTAIN_SCALE };
    let player = |a: usize| kept[a % q];
    let full_mu: Vec<f64> = (0..2 * q).map(|a| scale(a) * mu[player(a)]).collect();
    let mut cov = vec![0.0; 4 * q * q];
    for a in 0..2 * q {
        for b in 0..2 * q {
            cov[a * 2 * q + b] = scale(a) * scale(b) * sigma[player(a) * p + player(b)];
        }
    }
    let g = GaussianVector::from_flat(full_mu, cov)?;
    Ok(ProblemInstance::new(g, dfs_region(&filtered)?, Sense::Maximize, "dfs")?)
}

/// Synthetic slate: means `U(5, 25)`, covariance `scale * Q^T D Q`, random
/// teams with both represented.
pub fn gen_dfs(n_players: usize, scale: f64, seed: u64) -> Result<ProblemInstance, AppError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(AppError::Spec(format!("scale must be positive, got {scale}")));
    }
    let mut rng = stream(seed, Stream::Teams);
    let mut team_of: Vec<u8> = (0..n_players).map(|_| rng.random_range(1..=2)).collect();
    if n_players >= 2 {
        team_of[0] = 1;
        team_of[1] = 2;
    }
    let spec = DfsSpec::new(team_of);
    let mut rng = stream(seed, Stream::Means);
    let mu: Vec<f64> = (0..n_players).map(|_| rng.random_range(DEFAULT_MIN_SCORE..25.0)).collect();
    let sigma: Vec<f64> = random_psd(n_players, &mut stream(seed, Stream::Covariance)).into_iter().map(|v| scale * v).collect();
    let mut inst = dfs_instance(&spec, &mu, &sigma)?;
    inst.label = format!("dfs-p{n_players}-c{scale}-s{seed}");
    inst.meta = InstanceMeta { family: Some("dfs".into()), param: Some(scale), seed: Some(seed) };
    Ok(inst)
}
