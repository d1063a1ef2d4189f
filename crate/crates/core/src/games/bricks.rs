//! Breakout-like brick breaker. FIRE serves the ball; five lives.
//!
//! Brick presence lives in 18-bit row masks, three bytes per row with brick
//! `c` at bit `c % 8` of byte `c / 8`. Scores above 255 spill into a high byte.

use std::sync::OnceLock;

use super::{clamp_u8, Encoding, Game, RamCell};
use crate::frame::{color, Frame};
use crate::ram::{Action, RamState};
use crate::rng::SplitMix64;

pub const ROWS: usize = 6;
pub const COLUMNS: usize = 18;

pub const PADDLE_X: u8 = 0;
pub const BALL_X: u8 = 1;
pub const BALL_Y: u8 = 2;
pub const BALL_DX: u8 = 3;
pub const BALL_DY: u8 = 4;
pub const LIVES: u8 = 5;
pub const SCORE_LO: u8 = 6;
pub const SCORE_HI: u8 = 7;
pub const PADDLE_COLOR: u8 = 8;
pub const BALL_COLOR: u8 = 9;
pub const ROW_COLOR: u8 = 10;
pub const ROW_BITMASK: u8 = 16;

/// Points per brick, top row first.
pub const ROW_POINTS: [u16; ROWS] = [7, 7, 4, 4, 1, 1];
const ROW_COLORS: [u8; ROWS] = [
    color::RED,
    color::ORANGE,
    color::AMBER,
    color::YELLOW,
    color::GREEN,
    color::BLUE,
];

pub const WALL_LEFT: i32 = 8;
pub const WALL_RIGHT: i32 = 152;
pub const WALL_TOP: i32 = 32;
pub const BRICK_TOP: i32 = 57;
pub const BRICK_HEIGHT: i32 = 6;
pub const BRICK_WIDTH: i32 = 8;
pub const PADDLE_Y: i32 = 189;
pub const PADDLE_WIDTH: i32 = 16;
pub const PADDLE_HEIGHT: i32 = 4;
pub const PADDLE_SPEED: i32 = 3;
pub const BALL_W: i32 = 2;
pub const BALL_H: i32 = 4;
pub const START_LIVES: u8 = 5;
pub const BACKGROUND: u8 = color::BLACK;

const FULL_ROW: u32 = (1 << COLUMNS) - 1;

#[derive(Debug, Default, Clone, Copy)]
pub struct Bricks;

pub fn row_mask(ram: &RamState, row: usize) -> u32 {
    let base = ROW_BITMASK + 3 * row as u8;
    u32::from_le_bytes([ram.read(base), ram.read(base + 1), ram.read(base + 2), 0])
}

fn set_row_mask(ram: &mut RamState, row: usize, mask: u32) {
    let base = ROW_BITMASK + 3 * row as u8;
    let [a, b, c, _] = mask.to_le_bytes();
    ram.write(base, a);
    ram.write(base + 1, b);
    ram.write(base + 2, c);
}

pub fn bricks_left(ram: &RamState) -> u32 {
    (0..ROWS).map(|r| row_mask(ram, r).count_ones()).sum()
}

pub fn score_of(ram: &RamState) -> u16 {
    u16::from_le_bytes([ram.read(SCORE_LO), ram.read(SCORE_HI)])
}

fn add_score(ram: &mut RamState, points: u16) {
    let [lo, hi] = score_of(ram).wrapping_add(points).to_le_bytes();
    ram.write(SCORE_LO, lo);
    ram.write(SCORE_HI, hi);
}

/// A ball with zero vertical speed is waiting to be served.
pub fn ball_in_play(ram: &RamState) -> bool {
    ram.read(BALL_DY) != 0
}

impl Game for Bricks {
    fn id(&self) -> &'static str {
        "bricks"
    }

    fn description(&self) -> &'static str {
        "Breakout-like: clear six rows of bricks with five balls"
    }

    fn legal_actions(&self) -> &'static [Action] {
        &[Action::Noop, Action::Fire, Action::Left, Action::Right]
    }

    fn ram_map(&self) -> &[RamCell] {
        static MAP: OnceLock<Vec<RamCell>> = OnceLock::new();
        MAP.get_or_init(|| {
            use Encoding::*;
            let mut map = vec![
                RamCell::new("BR_PADDLE_X", PADDLE_X, Unsigned, "8..136", "paddle left column"),
                RamCell::new("BR_BALL_X", BALL_X, Unsigned, "8..150", "ball left column"),
                RamCell::new("BR_BALL_Y", BALL_Y, Unsigned, "32..204", "ball top row"),
                RamCell::new("BR_BALL_DX", BALL_DX, TwosComplement, "-2..2", "ball horizontal speed"),
                RamCell::new("BR_BALL_DY", BALL_DY, TwosComplement, "-2..2", "ball vertical speed, 0 = waiting for serve"),
                RamCell::new("BR_LIVES", LIVES, Unsigned, "0..5", "balls left"),
                RamCell::new("BR_SCORE_LO", SCORE_LO, Unsigned, "0..255", "score low byte"),
                RamCell::new("BR_SCORE_HI", SCORE_HI, Unsigned, "0..1", "score high byte"),
                RamCell::new("BR_PADDLE_COLOR", PADDLE_COLOR, Color, "0..255", "paddle color"),
                RamCell::new("BR_BALL_COLOR", BALL_COLOR, Color, "0..255", "ball color"),
            ];
            for row in 0..ROWS as u8 {
                map.push(RamCell::new(&format!("BR_ROW_COLOR[{row}]"), ROW_COLOR + row, Color, "0..255", &format!("brick row {row} color")));
            }
            for row in 0..ROWS as u8 {
                for byte in 0..3u8 {
                    map.push(RamCell::new(
                        &format!("BR_ROW_BITMASK[{row}].{byte}"),
                        ROW_BITMASK + 3 * row + byte,
                        Bitmask,
                        if byte == 2 { "0..3" } else { "0..255" },
                        &format!("row {row} bricks {}..{}", byte * 8, (byte * 8 + 7).min(17)),
                    ));
                }
            }
            map
        })
    }

    fn score_cells(&self) -> &'static [u8] {
        &[SCORE_LO, SCORE_HI]
    }

    fn reset(&self, ram: &mut RamState, _rng: &mut SplitMix64) {
        *ram = RamState::zeroed();
        ram.write(PADDLE_X, ((WALL_LEFT + WALL_RIGHT - PADDLE_WIDTH) / 2) as u8);
        ram.write(LIVES, START_LIVES);
        ram.write(PADDLE_COLOR, color::CYAN);
        ram.write(BALL_COLOR, color::CYAN);
        for (row, &c) in ROW_COLORS.iter().enumerate() {
            ram.write(ROW_COLOR + row as u8, c);
            set_row_mask(ram, row, FULL_ROW);
        }
    }

    fn tick(&self, ram: &mut RamState, action: Action, rng: &mut SplitMix64) {
        let mut paddle = ram.read(PADDLE_X) as i32;
        match action {
            Action::Left => paddle -= PADDLE_SPEED,
            Action::Right => paddle += PADDLE_SPEED,
            _ => {}
        }
        let paddle = clamp_u8(paddle, WALL_LEFT, WALL_RIGHT - PADDLE_WIDTH) as i32;
        ram.write(PADDLE_X, paddle as u8);

        if !ball_in_play(ram) {
            if action == Action::Fire {
                ram.write(BALL_X, (40 + rng.below(80)) as u8);
                ram.write(BALL_Y, 110);
                let dx = [-2i8, -1, 1, 2][rng.below(4) as usize];
                ram.write_signed(BALL_DX, dx);
                ram.write_signed(BALL_DY, 2);
            }
            return;
        }

        let mut dx = ram.read_signed(BALL_DX) as i32;
        let mut dy = ram.read_signed(BALL_DY) as i32;
        let mut x = ram.read(BALL_X) as i32 + dx;
        let mut y = ram.read(BALL_Y) as i32 + dy;

        if x < WALL_LEFT {
            x = 2 * WALL_LEFT - x;
            dx = dx.abs();
        } else if x + BALL_W > WALL_RIGHT {
            x = 2 * (WALL_RIGHT - BALL_W) - x;
            dx = -dx.abs();
        }
        if y < WALL_TOP {
            y = 2 * WALL_TOP - y;
            dy = dy.abs();
        }

        // At most one brick per tick, found at the ball's center.
        let cx = x + BALL_W / 2;
        let cy = y + BALL_H / 2;
        if cy >= BRICK_TOP && cy < BRICK_TOP + BRICK_HEIGHT * ROWS as i32 {
            let row = ((cy - BRICK_TOP) / BRICK_HEIGHT) as usize;
            let col = (cx - WALL_LEFT) / BRICK_WIDTH;
            if (0..COLUMNS as i32).contains(&col) {
                let mask = row_mask(ram, row);
                let bit = 1 << col;
                if mask & bit != 0 {
                    set_row_mask(ram, row, mask & !bit);
                    add_score(ram, ROW_POINTS[row]);
                    dy = -dy;
                }
            }
        }

        if dy > 0 && y + BALL_H >= PADDLE_Y && y < PADDLE_Y + PADDLE_HEIGHT && x + BALL_W > paddle && x < paddle + PADDLE_WIDTH {
            y = PADDLE_Y - BALL_H;
            dy = -dy;
            let offset = cx - (paddle + PADDLE_WIDTH / 2);
            dx = match (offset / 3).clamp(-2, 2) {
                0 => dx.signum(),
                v => v,
            };
        }

        if y > 200 {
            ram.write(LIVES, ram.read(LIVES).saturating_sub(1));
            ram.write(BALL_X, 0);
            ram.write(BALL_Y, 0);
            ram.write(BALL_DX, 0);
            ram.write(BALL_DY, 0);
            return;
        }
        ram.write(BALL_X, x as u8);
        ram.write(BALL_Y, y as u8);
        ram.write_signed(BALL_DX, dx as i8);
        ram.write_signed(BALL_DY, dy as i8);
    }

    fn score(&self, ram: &RamState) -> i32 {
        score_of(ram) as i32
    }

    fn is_over(&self, ram: &RamState) -> bool {
        ram.read(LIVES) == 0 || bricks_left(ram) == 0
    }

    fn render(&self, ram: &RamState, frame: &mut Frame) {
        frame.clear(BACKGROUND);
        frame.fill_rect(0, WALL_TOP - 8, 160, 8, color::GREY);
        frame.fill_rect(0, WALL_TOP, WALL_LEFT, 180, color::GREY);
        frame.fill_rect(WALL_RIGHT, WALL_TOP, 160 - WALL_RIGHT, 180, color::GREY);
        for row in 0..ROWS {
            let mask = row_mask(ram, row);
            let ink = ram.read(ROW_COLOR + row as u8);
            let y = BRICK_TOP + row as i32 * BRICK_HEIGHT;
            for col in 0..COLUMNS as i32 {
                if mask & (1 << col) != 0 {
                    frame.fill_rect(WALL_LEFT + col * BRICK_WIDTH, y, BRICK_WIDTH, BRICK_HEIGHT, ink);
                }
            }
        }
        frame.fill_rect(ram.read(PADDLE_X) as i32, PADDLE_Y, PADDLE_WIDTH, PADDLE_HEIGHT, ram.read(PADDLE_COLOR));
        if ball_in_play(ram) {
            frame.fill_rect(ram.read(BALL_X) as i32, ram.read(BALL_Y) as i32, BALL_W, BALL_H, ram.read(BALL_COLOR));
        }
        for i in 0..ram.read(LIVES) as i32 {
            frame.fill_rect(120 + i * 6, 4, 4, 8, color::WHITE);
        }
    }

    fn reference_score(&self) -> Option<f64> {
        Some(30.0)
    }
}
