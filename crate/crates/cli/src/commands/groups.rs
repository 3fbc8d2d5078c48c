use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use skillpool::metrics::kendall_tau;
use skillpool::posterior::{select_groups_with, DecileRule, SkillSummary};

use crate::errors::CliError;
use crate::io;

use super::{load_config, pick};

#[derive(Args)]
pub struct GroupsArgs {
    /// Posterior summaries produced by the pool command (summary.json).
    #[arg(long)]
    summary: PathBuf,
    /// Rank labels CSV (gamer,rank_a,split).
    #[arg(long)]
    ranks: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Later leaderboard sections CSV (gamer,rank_section) for the
    /// rank-improvement correlation test.
    #[arg(long)]
    future_ranks: Option<PathBuf>,
    /// Decile size rounding: ceil (default) or floor.
    #[arg(long, value_parser = parse_decile_rule)]
    decile_rule: Option<DecileRule>,
    /// JSON config file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_decile_rule(s: &str) -> Result<DecileRule, String> {
    match s {
        "ceil" => Ok(DecileRule::Ceil),
        "floor" => Ok(DecileRule::Floor),
        other => Err(format!("expected 'ceil' or 'floor', got {other:?}")),
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GroupsFileConfig {
    future_ranks: Option<PathBuf>,
    decile_rule: Option<String>,
}

/// Sections counted as top-tier or better on the leaderboard.
fn is_rank_a_or_higher(section: &str) -> bool {
    matches!(section, "A" | "G" | "S")
}

fn is_elite(section: &str) -> bool {
    matches!(section, "G" | "S")
}

pub fn run(args: GroupsArgs) -> Result<(), CliError> {
    let file: GroupsFileConfig = load_config(args.config.as_deref())?;
    let summaries_text = io::read_to_string(&args.summary)?;
    let summaries: Vec<SkillSummary> = serde_json::from_str(&summaries_text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.summary.display())))?;
    let ranks_text = io::read_to_string(&args.ranks)?;
    let ranks = io::parse_ranks_csv(&ranks_text, &args.ranks.display().to_string())?;

    let rule = pick(
        args.decile_rule,
        match file.decile_rule.as_deref() {
            None => None,
            Some(s) => Some(parse_decile_rule(s).map_err(CliError::Usage)?),
        },
        DecileRule::Ceil,
    );

    let (groups, warnings) = select_groups_with(&summaries, &ranks, rule)
        .map_err(|e| CliError::Data(e.to_string()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let map_of: HashMap<&str, f64> =
        summaries.iter().map(|s| (s.gamer.as_str(), s.map)).collect();
    let group_csv = |members: &[skillpool::model::GamerId]| -> String {
        let mut out = String::from("gamer,map\n");
        for g in members {
            out.push_str(&format!("{},{}\n", g, map_of[g.as_str()]));
        }
        out
    };
    io::write_atomic(&args.out.join("top_decile.csv"), group_csv(&groups.top_decile).as_bytes())?;
    io::write_atomic(
        &args.out.join("bottom_decile.csv"),
        group_csv(&groups.bottom_decile).as_bytes(),
    )?;
    io::write_atomic(
        &args.out.join("below_a_high_skill.csv"),
        group_csv(&groups.below_a_high_skill).as_bytes(),
    )?;
    eprintln!(
        "selected groups: top decile {}, bottom decile {}, high-skill below-A {}",
        groups.top_decile.len(),
        groups.bottom_decile.len(),
        groups.below_a_high_skill.len()
    );

    let future_path = args.future_ranks.or(file.future_ranks);
    if let Some(path) = future_path {
        let text = io::read_to_string(&path)?;
        let future = io::parse_future_ranks(&text, &path.display().to_string())?;
        let current: HashMap<&str, bool> =
            ranks.iter().map(|r| (r.gamer.as_str(), r.rank_a)).collect();

        let mut skill = Vec::with_capacity(future.len());
        let mut improvement = Vec::with_capacity(future.len());
        for (gamer, section) in &future {
            let Some(&map) = map_of.get(gamer.as_str()) else {
                return Err(CliError::Data(format!(
                    "{}: gamer {:?} has no posterior summary",
                    path.display(),
                    gamer.as_str()
                )));
            };
            let Some(&was_rank_a) = current.get(gamer.as_str()) else {
                return Err(CliError::Data(format!(
                    "{}: gamer {:?} has no current rank label",
                    path.display(),
                    gamer.as_str()
                )));
            };
            // Improvement means moving strictly above the current standing:
            // below-A gamers reaching the top section or higher, top-section
            // gamers reaching the elite sections.
            let improved = if was_rank_a {
                is_elite(section)
            } else {
                is_rank_a_or_higher(section)
            };
            skill.push(map);
            improvement.push(if improved { 1.0 } else { 0.0 });
        }

        let result =
            kendall_tau(&skill, &improvement).map_err(|e| CliError::Data(e.to_string()))?;
        let body = serde_json::json!({
            "n": skill.len(),
            "tau_b": result.tau_b,
            "p_value": result.p_value,
        });
        let body =
            serde_json::to_string_pretty(&body).map_err(|e| CliError::Io(e.to_string()))?;
        io::write_atomic(&args.out.join("kendall.json"), format!("{body}\n").as_bytes())?;
        println!(
            "rank-improvement correlation: tau_b = {:.4}, p = {:.5} (n = {})",
            result.tau_b,
            result.p_value,
            skill.len()
        );
    }
    Ok(())
}
