//! Pong-like two-paddle game. The player paddle is on the right, the
//! scripted enemy on the left.
//!
//! The enemy chases the ball vertically every tick, which is why its position
//! is a usable proxy for the ball's: the shortcut a policy can latch onto.
//! Enemy returns are soft (|dy| of 1, so the enemy soon re-centers on the
//! ball), player returns speed the ball up so the enemy can be beaten.

use std::sync::OnceLock;

use super::{clamp_u8, Encoding, Game, RamCell};
use crate::frame::{color, Frame};
use crate::ram::{Action, RamState};
use crate::rng::SplitMix64;

pub const PLAYER_Y: u8 = 0;
pub const ENEMY_Y: u8 = 1;
pub const BALL_X: u8 = 2;
pub const BALL_Y: u8 = 3;
pub const BALL_DX: u8 = 4;
pub const BALL_DY: u8 = 5;
pub const PLAYER_SCORE: u8 = 6;
pub const ENEMY_SCORE: u8 = 7;
pub const PLAYER_COLOR: u8 = 8;
pub const ENEMY_COLOR: u8 = 9;
pub const BALL_COLOR: u8 = 10;

pub const FIELD_TOP: i32 = 25;
pub const FIELD_BOTTOM: i32 = 185;
pub const CENTER_Y: u8 = 105;
pub const CENTER_X: u8 = 80;
/// Leftmost column of the player paddle.
pub const PLAYER_X: i32 = 140;
/// Leftmost column of the enemy paddle.
pub const ENEMY_X: i32 = 16;
pub const PADDLE_WIDTH: i32 = 4;
pub const PADDLE_HALF: i32 = 8;
pub const BALL_HALF_W: i32 = 1;
pub const BALL_HALF_H: i32 = 2;
pub const PLAYER_SPEED: i32 = 2;
pub const ENEMY_SPEED: i32 = 2;
pub const DEADBAND: i32 = 2;
pub const BALL_SPEED_X: i8 = 2;
pub const MAX_BALL_DY: i32 = 4;
pub const WINNING_SCORE: u8 = 21;
pub const BACKGROUND: u8 = color::BROWN;

const PADDLE_MIN: i32 = FIELD_TOP + PADDLE_HALF;
const PADDLE_MAX: i32 = FIELD_BOTTOM - PADDLE_HALF;

#[derive(Debug, Default, Clone, Copy)]
pub struct Paddleball;

fn serve(ram: &mut RamState, rng: &mut SplitMix64) {
    ram.write(BALL_X, CENTER_X);
    ram.write(BALL_Y, CENTER_Y);
    ram.write_signed(BALL_DX, -BALL_SPEED_X);
    let dy = [-2i8, -1, 1, 2][rng.below(4) as usize];
    ram.write_signed(BALL_DY, dy);
}

fn hits(paddle_y: i32, ball_y: i32) -> bool {
    (ball_y - paddle_y).abs() <= PADDLE_HALF + BALL_HALF_H
}

impl Game for Paddleball {
    fn id(&self) -> &'static str {
        "paddleball"
    }

    fn description(&self) -> &'static str {
        "Pong-like: return the ball past a ball-chasing enemy paddle, first to 21"
    }

    fn legal_actions(&self) -> &'static [Action] {
        &[Action::Noop, Action::Up, Action::Down]
    }

    fn ram_map(&self) -> &[RamCell] {
        static MAP: OnceLock<Vec<RamCell>> = OnceLock::new();
        MAP.get_or_init(|| {
            use Encoding::*;
            vec![
                RamCell::new("PB_PLAYER_Y", PLAYER_Y, Unsigned, "33..177", "player paddle center row"),
                RamCell::new("PB_ENEMY_Y", ENEMY_Y, Unsigned, "33..177", "enemy paddle center row"),
                RamCell::new("PB_BALL_X", BALL_X, Unsigned, "0..159", "ball center column"),
                RamCell::new("PB_BALL_Y", BALL_Y, Unsigned, "27..183", "ball center row"),
                RamCell::new("PB_BALL_DX", BALL_DX, TwosComplement, "-2..2", "ball horizontal speed, >0 toward player"),
                RamCell::new("PB_BALL_DY", BALL_DY, TwosComplement, "-4..4", "ball vertical speed, >0 downward"),
                RamCell::new("PB_PLAYER_SCORE", PLAYER_SCORE, Unsigned, "0..21", "player points"),
                RamCell::new("PB_ENEMY_SCORE", ENEMY_SCORE, Unsigned, "0..21", "enemy points"),
                RamCell::new("PB_PLAYER_COLOR", PLAYER_COLOR, Color, "0..255", "player paddle color"),
                RamCell::new("PB_ENEMY_COLOR", ENEMY_COLOR, Color, "0..255", "enemy paddle color"),
                RamCell::new("PB_BALL_COLOR", BALL_COLOR, Color, "0..255", "ball color"),
            ]
        })
    }

    fn score_cells(&self) -> &'static [u8] {
        &[PLAYER_SCORE, ENEMY_SCORE]
    }

    fn reset(&self, ram: &mut RamState, rng: &mut SplitMix64) {
        *ram = RamState::zeroed();
        ram.write(PLAYER_Y, CENTER_Y);
        ram.write(ENEMY_Y, CENTER_Y);
        ram.write(PLAYER_COLOR, color::GREEN);
        ram.write(ENEMY_COLOR, color::ORANGE);
        ram.write(BALL_COLOR, color::WHITE);
        serve(ram, rng);
    }

    fn tick(&self, ram: &mut RamState, action: Action, rng: &mut SplitMix64) {
        let mut player = ram.read(PLAYER_Y) as i32;
        match action {
            Action::Up => player -= PLAYER_SPEED,
            Action::Down => player += PLAYER_SPEED,
            _ => {}
        }
        ram.write(PLAYER_Y, clamp_u8(player, PADDLE_MIN, PADDLE_MAX));

        let ball_y = ram.read(BALL_Y) as i32;
        let enemy = ram.read(ENEMY_Y) as i32;
        let gap = ball_y - enemy;
        if gap.abs() > DEADBAND {
            let step = gap.signum() * gap.abs().min(ENEMY_SPEED);
            ram.write(ENEMY_Y, clamp_u8(enemy + step, PADDLE_MIN, PADDLE_MAX));
        }

        let dx = ram.read_signed(BALL_DX) as i32;
        let mut dy = ram.read_signed(BALL_DY) as i32;
        let mut x = ram.read(BALL_X) as i32 + dx;
        let mut y = ball_y + dy;
        if y - BALL_HALF_H < FIELD_TOP {
            y = 2 * (FIELD_TOP + BALL_HALF_H) - y;
            dy = dy.abs();
        } else if y + BALL_HALF_H > FIELD_BOTTOM {
            y = 2 * (FIELD_BOTTOM - BALL_HALF_H) - y;
            dy = -dy.abs();
        }

        let player_face = PLAYER_X - BALL_HALF_W;
        let enemy_face = ENEMY_X + PADDLE_WIDTH + BALL_HALF_W;
        let prev_x = x - dx;
        let mut new_dx = dx;
        if dx > 0 && prev_x < player_face && x >= player_face && hits(ram.read(PLAYER_Y) as i32, y) {
            x = player_face - 1;
            new_dx = -dx;
            // Player returns keep their vertical direction and speed up.
            dy = dy.signum() * (dy.abs() + 2).min(MAX_BALL_DY);
        } else if dx < 0 && prev_x > enemy_face && x <= enemy_face && hits(ram.read(ENEMY_Y) as i32, y) {
            x = enemy_face + 1;
            new_dx = -dx;
            let offset = y - ram.read(ENEMY_Y) as i32;
            let sign = match offset.signum() {
                0 => {
                    if rng.coin() {
                        1
                    } else {
                        -1
                    }
                }
                s => s,
            };
            dy = sign;
        }

        if x >= 158 {
            ram.write(ENEMY_SCORE, ram.read(ENEMY_SCORE).saturating_add(1));
            serve(ram, rng);
            return;
        }
        if x <= 1 {
            ram.write(PLAYER_SCORE, ram.read(PLAYER_SCORE).saturating_add(1));
            serve(ram, rng);
            return;
        }
        ram.write(BALL_X, x as u8);
        ram.write(BALL_Y, y as u8);
        ram.write_signed(BALL_DX, new_dx as i8);
        ram.write_signed(BALL_DY, dy as i8);
    }

    fn score(&self, ram: &RamState) -> i32 {
        ram.read(PLAYER_SCORE) as i32 - ram.read(ENEMY_SCORE) as i32
    }

    fn is_over(&self, ram: &RamState) -> bool {
        ram.read(PLAYER_SCORE) >= WINNING_SCORE || ram.read(ENEMY_SCORE) >= WINNING_SCORE
    }

    fn render(&self, ram: &RamState, frame: &mut Frame) {
        frame.clear(BACKGROUND);
        frame.fill_rect(0, FIELD_TOP - 4, 160, 4, color::GREY);
        frame.fill_rect(0, FIELD_BOTTOM, 160, 4, color::GREY);
        draw_score(frame, 40, ram.read(ENEMY_SCORE), ram.read(ENEMY_COLOR));
        draw_score(frame, 112, ram.read(PLAYER_SCORE), ram.read(PLAYER_COLOR));
        let py = ram.read(PLAYER_Y) as i32;
        let ey = ram.read(ENEMY_Y) as i32;
        frame.fill_rect(PLAYER_X, py - PADDLE_HALF, PADDLE_WIDTH, 2 * PADDLE_HALF, ram.read(PLAYER_COLOR));
        frame.fill_rect(ENEMY_X, ey - PADDLE_HALF, PADDLE_WIDTH, 2 * PADDLE_HALF, ram.read(ENEMY_COLOR));
        let bx = ram.read(BALL_X) as i32;
        let by = ram.read(BALL_Y) as i32;
        frame.fill_rect(bx - BALL_HALF_W, by - BALL_HALF_H, 2 * BALL_HALF_W, 2 * BALL_HALF_H, ram.read(BALL_COLOR));
    }

    fn reference_score(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Score as a row of tally marks, one 2px bar per point.
fn draw_score(frame: &mut Frame, x: i32, points: u8, ink: u8) {
    for i in 0..points.min(21) as i32 {
        frame.fill_rect(x + (i % 11) * 3, 4 + (i / 11) * 8, 2, 6, ink);
    }
}
