//! Palette-indexed 160x210 frames.

use std::sync::OnceLock;

pub const FRAME_WIDTH: usize = 160;
pub const FRAME_HEIGHT: usize = 210;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

/// Named palette indices. Indices are laid out as `hue << 4 | luminance << 1`,
/// as on the 2600, so odd indices alias their even neighbour.
pub mod color {
    pub const BLACK: u8 = 0x00;
    pub const DARK_GREY: u8 = 0x04;
    pub const GREY: u8 = 0x08;
    pub const WHITE: u8 = 0x0e;
    pub const RED: u8 = 0x18;
    pub const ORANGE: u8 = 0x28;
    pub const AMBER: u8 = 0x38;
    pub const YELLOW: u8 = 0x48;
    pub const LIME: u8 = 0x58;
    pub const GREEN: u8 = 0x68;
    pub const TEAL: u8 = 0x78;
    pub const CYAN: u8 = 0x88;
    pub const BLUE: u8 = 0xa8;
    pub const VIOLET: u8 = 0xc8;
    pub const MAGENTA: u8 = 0xd8;
    pub const PINK: u8 = 0xe8;
    pub const BROWN: u8 = 0xf6;
}

const HUE_DEGREES: [f64; 16] = [
    0.0, 0.0, 20.0, 40.0, 55.0, 90.0, 120.0, 160.0, 185.0, 205.0, 225.0, 250.0, 275.0, 300.0,
    330.0, 28.0,
];

fn build_palette() -> [Rgb; 256] {
    let mut out = [Rgb(0, 0, 0); 256];
    for (i, slot) in out.iter_mut().enumerate() {
        let hue = i >> 4;
        let lum = (i >> 1) & 7;
        let v = lum as f64 / 7.0;
        if hue == 0 {
            let g = (v * 236.0).round() as u8;
            *slot = Rgb(g, g, g);
            continue;
        }
        let value = 0.2 + 0.8 * v;
        let sat = if hue == 15 { 0.6 } else { 0.8 };
        let (r, g, b) = hsv(HUE_DEGREES[hue], sat, value);
        *slot = Rgb(r, g, b);
    }
    out
}

fn hsv(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (q(r), q(g), q(b))
}

/// The fixed 256-entry palette shared by every game.
pub fn palette() -> &'static [Rgb; 256] {
    static PALETTE: OnceLock<[Rgb; 256]> = OnceLock::new();
    PALETTE.get_or_init(build_palette)
}

#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(background: u8) -> Self {
        Frame {
            pixels: vec![background; FRAME_WIDTH * FRAME_HEIGHT],
        }
    }

    pub fn width(&self) -> usize {
        FRAME_WIDTH
    }

    pub fn height(&self) -> usize {
        FRAME_HEIGHT
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * FRAME_WIDTH..(y + 1) * FRAME_WIDTH]
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * FRAME_WIDTH + x]
    }

    pub fn rgb(&self, x: usize, y: usize) -> Rgb {
        palette()[self.get(x, y) as usize]
    }

    pub fn palette(&self) -> &'static [Rgb; 256] {
        palette()
    }

    pub fn clear(&mut self, background: u8) {
        self.pixels.fill(background);
    }

    /// Fills the rectangle `[x, x+w) x [y, y+h)`, clipped to the frame.
    pub fn fill_rect(&mut self, x: i32, y: i32, w: i32, h: i32, color: u8) {
        let x0 = x.clamp(0, FRAME_WIDTH as i32) as usize;
        let x1 = (x + w).clamp(0, FRAME_WIDTH as i32) as usize;
        let y0 = y.clamp(0, FRAME_HEIGHT as i32) as usize;
        let y1 = (y + h).clamp(0, FRAME_HEIGHT as i32) as usize;
        if x0 >= x1 {
            return;
        }
        for row in y0..y1 {
            self.pixels[row * FRAME_WIDTH + x0..row * FRAME_WIDTH + x1].fill(color);
        }
    }

    /// Palette indices present in the frame, ascending.
    pub fn used_colors(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &p in &self.pixels {
            seen[p as usize] = true;
        }
        (0..=255u8).filter(|&c| seen[c as usize]).collect()
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &FRAME_WIDTH)
            .field("height", &FRAME_HEIGHT)
            .field("colors", &self.used_colors())
            .finish()
    }
}
