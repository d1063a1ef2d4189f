//! Freeway-like road crossing: guide the chicken up through ten lanes of
//! two-way traffic before the clock runs out. A collision knocks the chicken
//! down for [`KNOCK_TICKS`] ticks during which input is ignored.

use std::sync::OnceLock;

use super::{Encoding, Game, RamCell};
use crate::frame::{color, Frame};
use crate::ram::{Action, RamState};
use crate::rng::SplitMix64;

pub const LANES: usize = 10;

pub const CHICKEN_Y: u8 = 0;
pub const CAR_X: u8 = 1;
pub const CAR_SPEED: u8 = 11;
pub const CAR_COLOR: u8 = 21;
pub const SCORE: u8 = 31;
pub const KNOCK_TIMER: u8 = 32;
pub const TIME_HI: u8 = 33;
pub const TIME_LO: u8 = 34;
/// Byte drawn uniformly from `0..LANE_PICK_RANGE` at reset; variants use it
/// to pick a lane.
pub const LANE_PICK: u8 = 35;
pub const LANE_PICK_RANGE: u32 = 250;

/// Chicken immobilization after a collision.
pub const KNOCK_TICKS: u8 = 24;
pub const EPISODE_TICKS: u16 = 2048;
pub const CHICKEN_X: i32 = 44;
pub const CHICKEN_HALF_W: i32 = 3;
pub const CHICKEN_HALF_H: i32 = 4;
pub const CHICKEN_SPEED: i32 = 2;
pub const START_Y: u8 = 198;
/// Reaching this row or above counts as a crossing.
pub const GOAL_Y: u8 = 24;
pub const LANE_TOP: i32 = 30;
pub const LANE_HEIGHT: i32 = 16;
pub const CAR_WIDTH: i32 = 8;
pub const CAR_HEIGHT: i32 = 8;
pub const ROAD_WIDTH: i32 = 160;

/// Upper five lanes drive left, lower five right, as on a two-way highway.
pub const BASE_SPEEDS: [i8; LANES] = [-1, -2, -3, -2, -1, 1, 2, 3, 2, 1];
const LANE_COLORS: [u8; LANES] = [
    color::YELLOW,
    color::GREEN,
    color::RED,
    color::BLUE,
    color::PINK,
    color::AMBER,
    color::CYAN,
    color::VIOLET,
    color::LIME,
    color::ORANGE,
];
pub const ROAD: u8 = color::DARK_GREY;
pub const SIDEWALK: u8 = color::GREY;
pub const CHICKEN_COLOR: u8 = color::WHITE;

#[derive(Debug, Default, Clone, Copy)]
pub struct Crossing;

/// Lane containing row `y`, if any.
pub fn lane_of(y: i32) -> Option<usize> {
    if y < LANE_TOP || y >= LANE_TOP + LANE_HEIGHT * LANES as i32 {
        return None;
    }
    Some(((y - LANE_TOP) / LANE_HEIGHT) as usize)
}

/// X position of the car in the chicken's current lane, 0 on the sidewalks.
pub fn car_x_in_chicken_lane(ram: &RamState) -> u8 {
    match lane_of(ram.read(CHICKEN_Y) as i32) {
        Some(lane) => ram.read(CAR_X + lane as u8),
        None => 0,
    }
}

fn time_left(ram: &RamState) -> u16 {
    u16::from_be_bytes([ram.read(TIME_HI), ram.read(TIME_LO)])
}

fn overlaps_chicken(car_x: i32) -> bool {
    // Cars wrap around the road, so test the car and its wrapped twin.
    let lo = CHICKEN_X - CHICKEN_HALF_W;
    let hi = CHICKEN_X + CHICKEN_HALF_W;
    [car_x, car_x - ROAD_WIDTH]
        .iter()
        .any(|&x| x < hi && x + CAR_WIDTH > lo)
}

impl Game for Crossing {
    fn id(&self) -> &'static str {
        "crossing"
    }

    fn description(&self) -> &'static str {
        "Freeway-like: cross ten lanes of traffic as often as possible before time runs out"
    }

    fn legal_actions(&self) -> &'static [Action] {
        &[Action::Noop, Action::Up, Action::Down]
    }

    fn ram_map(&self) -> &[RamCell] {
        static MAP: OnceLock<Vec<RamCell>> = OnceLock::new();
        MAP.get_or_init(|| {
            use Encoding::*;
            let mut map = vec![RamCell::new("CR_CHICKEN_Y", CHICKEN_Y, Unsigned, "24..198", "chicken center row")];
            for lane in 0..LANES as u8 {
                map.push(RamCell::new(&format!("CR_CAR_X[{lane}]"), CAR_X + lane, Unsigned, "0..159", &format!("lane {lane} car left column")));
            }
            for lane in 0..LANES as u8 {
                map.push(RamCell::new(&format!("CR_CAR_SPEED[{lane}]"), CAR_SPEED + lane, TwosComplement, "-3..3", &format!("lane {lane} car speed, >0 rightward")));
            }
            for lane in 0..LANES as u8 {
                map.push(RamCell::new(&format!("CR_CAR_COLOR[{lane}]"), CAR_COLOR + lane, Color, "0..255", &format!("lane {lane} car color")));
            }
            map.push(RamCell::new("CR_SCORE", SCORE, Unsigned, "0..255", "completed crossings"));
            map.push(RamCell::new("CR_KNOCK_TIMER", KNOCK_TIMER, Unsigned, "0..24", "ticks of knock-back left"));
            map.push(RamCell::new("CR_TIME_HI", TIME_HI, Unsigned, "0..8", "ticks left, high byte"));
            map.push(RamCell::new("CR_TIME_LO", TIME_LO, Unsigned, "0..255", "ticks left, low byte"));
            map.push(RamCell::new("CR_LANE_PICK", LANE_PICK, Unsigned, "0..249", "random byte drawn at reset"));
            map
        })
    }

    fn score_cells(&self) -> &'static [u8] {
        &[SCORE]
    }

    fn reset(&self, ram: &mut RamState, rng: &mut SplitMix64) {
        *ram = RamState::zeroed();
        ram.write(CHICKEN_Y, START_Y);
        for lane in 0..LANES as u8 {
            ram.write(CAR_X + lane, rng.below(ROAD_WIDTH as u32) as u8);
            ram.write_signed(CAR_SPEED + lane, BASE_SPEEDS[lane as usize]);
            ram.write(CAR_COLOR + lane, LANE_COLORS[lane as usize]);
        }
        let [hi, lo] = EPISODE_TICKS.to_be_bytes();
        ram.write(TIME_HI, hi);
        ram.write(TIME_LO, lo);
        ram.write(LANE_PICK, rng.below(LANE_PICK_RANGE) as u8);
    }

    fn tick(&self, ram: &mut RamState, action: Action, _rng: &mut SplitMix64) {
        for lane in 0..LANES as u8 {
            let x = ram.read(CAR_X + lane) as i32 + ram.read_signed(CAR_SPEED + lane) as i32;
            ram.write(CAR_X + lane, x.rem_euclid(ROAD_WIDTH) as u8);
        }

        let mut y = ram.read(CHICKEN_Y) as i32;
        let knock = ram.read(KNOCK_TIMER);
        if knock > 0 {
            ram.write(KNOCK_TIMER, knock - 1);
            y = (y + 1).min(START_Y as i32);
        } else {
            match action {
                Action::Up => y -= CHICKEN_SPEED,
                Action::Down => y = (y + CHICKEN_SPEED).min(START_Y as i32),
                _ => {}
            }
            if let Some(lane) = lane_of(y) {
                if overlaps_chicken(ram.read(CAR_X + lane as u8) as i32) {
                    ram.write(KNOCK_TIMER, KNOCK_TICKS);
                }
            }
        }
        if y <= GOAL_Y as i32 {
            ram.write(SCORE, ram.read(SCORE).wrapping_add(1));
            y = START_Y as i32;
        }
        ram.write(CHICKEN_Y, y as u8);

        let [hi, lo] = time_left(ram).saturating_sub(1).to_be_bytes();
        ram.write(TIME_HI, hi);
        ram.write(TIME_LO, lo);
    }

    fn score(&self, ram: &RamState) -> i32 {
        ram.read(SCORE) as i32
    }

    fn is_over(&self, ram: &RamState) -> bool {
        time_left(ram) == 0
    }

    fn render(&self, ram: &RamState, frame: &mut Frame) {
        frame.clear(SIDEWALK);
        frame.fill_rect(0, LANE_TOP, ROAD_WIDTH, LANE_HEIGHT * LANES as i32, ROAD);
        for lane in 0..LANES as i32 {
            if lane > 0 {
                frame.fill_rect(0, LANE_TOP + lane * LANE_HEIGHT, ROAD_WIDTH, 1, color::AMBER);
            }
            let x = ram.read(CAR_X + lane as u8) as i32;
            let y = LANE_TOP + lane * LANE_HEIGHT + (LANE_HEIGHT - CAR_HEIGHT) / 2;
            let ink = ram.read(CAR_COLOR + lane as u8);
            frame.fill_rect(x, y, CAR_WIDTH, CAR_HEIGHT, ink);
            frame.fill_rect(x - ROAD_WIDTH, y, CAR_WIDTH, CAR_HEIGHT, ink);
        }
        let cy = ram.read(CHICKEN_Y) as i32;
        frame.fill_rect(CHICKEN_X - CHICKEN_HALF_W, cy - CHICKEN_HALF_H, 2 * CHICKEN_HALF_W, 2 * CHICKEN_HALF_H, CHICKEN_COLOR);
        for i in 0..(ram.read(SCORE) as i32).min(40) {
            frame.fill_rect(60 + (i % 20) * 4, 4 + (i / 20) * 10, 2, 8, color::WHITE);
        }
    }

    fn reference_score(&self) -> Option<f64> {
        Some(6.0)
    }
}
