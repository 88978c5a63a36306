//! Interactive loop over one combat.
//!
//! Lines starting with `!` are commands; anything else is chat. `:as <id>`
//! acts as a combatant (`:as` alone goes back to the current turn),
//! `:actors` lists the roster and `:quit` exits.

use std::io::{BufRead, Write};

use fireball_core::engine::turn_banner;
use fireball_core::eventlog::Session;
use fireball_core::statecore::render_actor_line;

use crate::stamp;

pub const PLAYER_ID: &str = "player";

fn banner(session: &Session) -> Option<String> {
    turn_banner(&session.state).ok()
}

fn print_actors(session: &Session, out: &mut impl Write) -> std::io::Result<()> {
    for line in session.state.actor_lines() {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Runs until `:quit` or end of input. Every command and chat line is
/// recorded in the session's log.
pub fn run(session: &mut Session, input: impl BufRead, mut out: impl Write) -> anyhow::Result<()> {
    let mut caster: Option<String> = None;
    print_actors(session, &mut out)?;
    if let Some(b) = banner(session) {
        writeln!(out, "{b}")?;
    }
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once(' ').map_or((line, ""), |(a, b)| (a, b.trim())) {
            (":quit", _) => break,
            (":actors", _) => print_actors(session, &mut out)?,
            (":as", "") => caster = None,
            (":as", id) => match session.state.get(id).or_else(|| {
                session.state.combatants.iter().find(|c| c.id.eq_ignore_ascii_case(id))
            }) {
                Some(c) => caster = Some(c.id.clone()),
                None => writeln!(out, "error: no combatant named '{id}'")?,
            },
            (cmd, _) if cmd.starts_with(':') => writeln!(out, "error: unknown directive '{cmd}'")?,
            _ if line.starts_with('!') => {
                let before = banner(session);
                let at = stamp(&session.log);
                match session.command(at, PLAYER_ID, caster.as_deref(), line)? {
                    Ok(report) => {
                        for l in &report.mechanical_lines {
                            writeln!(out, "{l}")?;
                        }
                        for id in &report.targets {
                            if let Some(c) = session.state.get(id) {
                                writeln!(out, "{}", render_actor_line(c))?;
                            }
                        }
                        let after = banner(session);
                        if let Some(b) = after.filter(|b| Some(b) != before.as_ref() && !report.mechanical_lines.contains(b)) {
                            writeln!(out, "{b}")?;
                        }
                    }
                    Err(e) => writeln!(out, "error: {e}")?,
                }
            }
            _ => {
                let at = stamp(&session.log);
                session.message(at, PLAYER_ID, "Player", line)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}
