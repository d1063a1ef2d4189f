//! Native RAM-mapped games and their built-in variants.
//!
//! Each game documents its RAM map: the symbol table patch authors write
//! against. Tick rules touch only RAM and the machine RNG; render rules read
//! only RAM. Color cells are read by render and nowhere else, so recoloring
//! variants can never change dynamics.

use std::sync::OnceLock;

use thiserror::Error;

use crate::frame::Frame;
use crate::patch::{self, PatchSpec};
use crate::ram::{Action, RamState};
use crate::rng::SplitMix64;

pub mod bricks;
pub mod crossing;
pub mod paddleball;

pub use bricks::Bricks;
pub use crossing::Crossing;
pub use paddleball::Paddleball;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("unknown game '{0}'")]
    UnknownGame(String),
    #[error("unknown variant '{variant}' for game '{game}'")]
    UnknownVariant { game: String, variant: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Unsigned,
    TwosComplement,
    Color,
    Bitmask,
}

impl Encoding {
    pub fn label(self) -> &'static str {
        match self {
            Encoding::Unsigned => "unsigned",
            Encoding::TwosComplement => "two's-complement",
            Encoding::Color => "palette-index",
            Encoding::Bitmask => "bitmask",
        }
    }
}

/// One row of a game's RAM map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamCell {
    pub symbol: String,
    pub address: u8,
    pub encoding: Encoding,
    pub range: String,
    pub meaning: String,
}

impl RamCell {
    pub fn new(symbol: &str, address: u8, encoding: Encoding, range: &str, meaning: &str) -> Self {
        RamCell {
            symbol: symbol.to_string(),
            address,
            encoding,
            range: range.to_string(),
            meaning: meaning.to_string(),
        }
    }
}

pub trait Game: Send + Sync {
    fn id(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn legal_actions(&self) -> &'static [Action];

    fn ram_map(&self) -> &[RamCell];

    /// Cells the score is decoded from.
    fn score_cells(&self) -> &'static [u8];

    /// Game-defined reset: writes the full initial RAM image.
    fn reset(&self, ram: &mut RamState, rng: &mut SplitMix64);

    /// Advances the game by one logic tick. `action` is already legal.
    fn tick(&self, ram: &mut RamState, action: Action, rng: &mut SplitMix64);

    fn score(&self, ram: &RamState) -> i32;

    fn is_over(&self, ram: &RamState) -> bool;

    /// Draws the frame for `ram`. Must overwrite every pixel.
    fn render(&self, ram: &RamState, frame: &mut Frame);

    /// Average human score displayed during free training, if one is configured.
    fn reference_score(&self) -> Option<f64> {
        None
    }

    fn is_legal(&self, action: Action) -> bool {
        self.legal_actions().contains(&action)
    }

    /// Illegal actions execute as NOOP.
    fn sanitize(&self, action: Action) -> Action {
        if self.is_legal(action) {
            action
        } else {
            Action::Noop
        }
    }

    fn address_of(&self, symbol: &str) -> Option<u8> {
        self.ram_map()
            .iter()
            .find(|c| c.symbol == symbol)
            .map(|c| c.address)
    }

    fn color_cells(&self) -> Vec<u8> {
        self.ram_map()
            .iter()
            .filter(|c| c.encoding == Encoding::Color)
            .map(|c| c.address)
            .collect()
    }
}

static PADDLEBALL: Paddleball = Paddleball;
static CROSSING: Crossing = Crossing;
static BRICKS: Bricks = Bricks;

pub fn register_builtin_games() -> Vec<&'static dyn Game> {
    vec![&PADDLEBALL, &CROSSING, &BRICKS]
}

pub fn game(id: &str) -> Result<&'static dyn Game, GameError> {
    register_builtin_games()
        .into_iter()
        .find(|g| g.id() == id)
        .ok_or_else(|| GameError::UnknownGame(id.to_string()))
}

struct VariantDoc {
    game: &'static str,
    summary: &'static str,
    json: &'static str,
}

const VARIANT_DOCS: &[VariantDoc] = &[
    VariantDoc {
        game: "paddleball",
        summary: "enemy paddle freezes while the ball travels toward the player",
        json: include_str!("variants/paddleball_lazy_enemy.json"),
    },
    VariantDoc {
        game: "paddleball",
        summary: "enemy paddle drawn in the background color",
        json: include_str!("variants/paddleball_hidden_enemy.json"),
    },
    VariantDoc {
        game: "crossing",
        summary: "every car is stopped, crossing becomes trivial",
        json: include_str!("variants/crossing_stop_all_cars.json"),
    },
    VariantDoc {
        game: "crossing",
        summary: "all cars drawn black",
        json: include_str!("variants/crossing_all_black_cars.json"),
    },
    VariantDoc {
        game: "crossing",
        summary: "one lane, picked at reset, has its car stopped",
        json: include_str!("variants/crossing_stop_random_car.json"),
    },
    VariantDoc {
        game: "bricks",
        summary: "paddle and ball drawn red",
        json: include_str!("variants/bricks_color_player_and_ball_red.json"),
    },
    VariantDoc {
        game: "bricks",
        summary: "every brick row drawn red",
        json: include_str!("variants/bricks_color_all_blocks_red.json"),
    },
];

fn parsed_variants() -> &'static [(PatchSpec, &'static str)] {
    static PARSED: OnceLock<Vec<(PatchSpec, &'static str)>> = OnceLock::new();
    PARSED.get_or_init(|| {
        VARIANT_DOCS
            .iter()
            .map(|doc| {
                let spec = patch::parse_patch(doc.json)
                    .unwrap_or_else(|e| panic!("built-in variant for {} is invalid: {e}", doc.game));
                debug_assert_eq!(spec.game_id, doc.game);
                (spec, doc.summary)
            })
            .collect()
    })
}

/// Built-in variants of `game_id`, in catalog order.
pub fn builtin_variants(game_id: &str) -> Result<Vec<PatchSpec>, GameError> {
    game(game_id)?;
    Ok(parsed_variants()
        .iter()
        .filter(|(s, _)| s.game_id == game_id)
        .map(|(s, _)| s.clone())
        .collect())
}

/// One-line description of a built-in variant.
pub fn variant_summary(game_id: &str, name: &str) -> Option<&'static str> {
    parsed_variants()
        .iter()
        .find(|(s, _)| s.game_id == game_id && s.name == name)
        .map(|(_, d)| *d)
}

pub fn builtin_variant(game_id: &str, name: &str) -> Result<PatchSpec, GameError> {
    builtin_variants(game_id)?
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| GameError::UnknownVariant {
            game: game_id.to_string(),
            variant: name.to_string(),
        })
}

/// Clamps `v` into `lo..=hi` and stores it as an unsigned byte.
pub(crate) fn clamp_u8(v: i32, lo: i32, hi: i32) -> u8 {
    v.clamp(lo, hi) as u8
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn registry_has_three_disjoint_games() {
        let games = register_builtin_games();
        assert_eq!(games.len(), 3);
        let ids: HashSet<_> = games.iter().map(|g| g.id()).collect();
        assert_eq!(ids.len(), 3);
        assert!(matches!(game("nosuchgame"), Err(GameError::UnknownGame(_))));
    }

    #[test]
    fn documented_action_sets() {
        use Action::*;
        assert_eq!(game("paddleball").unwrap().legal_actions(), &[Noop, Up, Down]);
        assert_eq!(game("crossing").unwrap().legal_actions(), &[Noop, Up, Down]);
        assert_eq!(game("bricks").unwrap().legal_actions(), &[Noop, Fire, Left, Right]);
    }

    #[test]
    fn ram_maps_are_well_formed() {
        for g in register_builtin_games() {
            let map = g.ram_map();
            let symbols: HashSet<_> = map.iter().map(|c| c.symbol.as_str()).collect();
            assert_eq!(symbols.len(), map.len(), "{} has duplicate symbols", g.id());
            let addrs: HashSet<_> = map.iter().map(|c| c.address).collect();
            assert_eq!(addrs.len(), map.len(), "{} has aliased addresses", g.id());
            assert!(map.iter().all(|c| c.address < 128));
            for cell in g.score_cells() {
                assert!(addrs.contains(cell), "{} score cell {cell} not mapped", g.id());
            }
        }
    }

    #[test]
    fn variant_catalog() {
        let names = |g| -> Vec<String> {
            builtin_variants(g).unwrap().into_iter().map(|s| s.name).collect()
        };
        assert_eq!(names("paddleball"), ["lazy_enemy", "hidden_enemy"]);
        assert_eq!(names("crossing"), ["stop_all_cars", "all_black_cars", "stop_random_car"]);
        assert_eq!(names("bricks"), ["color_player_and_ball_red", "color_all_blocks_red"]);
        assert!(matches!(builtin_variants("pong"), Err(GameError::UnknownGame(_))));
        for g in register_builtin_games() {
            for v in builtin_variants(g.id()).unwrap() {
                assert!(variant_summary(g.id(), &v.name).is_some());
            }
        }
    }
}
