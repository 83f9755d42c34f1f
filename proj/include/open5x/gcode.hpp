#pragma once

#include "open5x/error.hpp"
#include "open5x/program.hpp"
#include "open5x/toolpath.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace open5x {

// Fixed output precision per word class.
inline constexpr int kLinearDigits = 4;
inline constexpr int kAngularDigits = 3;
inline constexpr int kExtrusionDigits = 5;
inline constexpr int kFeedDigits = 3;

/// Fixed decimal notation, never an exponent, never "-0.000".
inline std::string format_fixed(double v, int digits) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    std::string s(buf, end);
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos)
        s.erase(0, 1);
    return s;
}

/// Feedrates are rounded down, so a written program never asks for more
/// speed than was planned, and trailing zeros are dropped: F1200, F1200.66.
inline std::string format_feed(double f) {
    const double scale = std::pow(10.0, kFeedDigits);
    double floored = std::floor(f * scale * (1.0 + 1e-12)) / scale;
    std::string s = format_fixed(floored, kFeedDigits);
    while (s.back() == '0')
        s.pop_back();
    if (s.back() == '.')
        s.pop_back();
    return s;
}

inline constexpr std::string_view kPreamble = "; open5x 5-axis program\nG21\nG90\nM83\n";
inline constexpr std::string_view kPostamble = "M400\n";

/// RepRap-flavour XYZUVE program: absolute axes, relative extrusion. Axis
/// words are written only when their formatted value changes; F is also
/// forced on the first move of each path. Moves that change nothing
/// produce no line.
inline std::string emit(const MachineProgram& prog) {
    std::string out(kPreamble);
    std::array<std::optional<std::string>, 5> last_axis;
    std::optional<std::string> last_feed;
    std::optional<MachinePose> last_pose;
    static constexpr char kLetters[5] = {'X', 'Y', 'Z', 'U', 'V'};

    for (const MachineMove& m : prog.moves) {
        const MachinePose& p = m.pose;
        const double prev_e = last_pose ? last_pose->e : 0.0;
        std::string line;
        if (m.kind == MoveKind::Retract || m.kind == MoveKind::Unretract) {
            std::string e = format_fixed(p.e - prev_e, kExtrusionDigits);
            if (e == format_fixed(0.0, kExtrusionDigits))
                continue;
            line = "G1 E" + e;
        } else {
            line = m.kind == MoveKind::Extrude ? "G1" : "G0";
            const double values[5] = {p.x, p.y, p.z, p.u, p.v};
            bool moved = false;
            for (int a = 0; a < 5; ++a) {
                std::string w = format_fixed(values[a], a < 3 ? kLinearDigits : kAngularDigits);
                if (last_axis[a] && *last_axis[a] == w)
                    continue;
                line += ' ';
                line += kLetters[a];
                line += w;
                last_axis[a] = std::move(w);
                moved = true;
            }
            if (m.kind == MoveKind::Extrude) {
                std::string e = format_fixed(p.e - prev_e, kExtrusionDigits);
                if (!moved && e == format_fixed(0.0, kExtrusionDigits))
                    continue;
                line += " E" + e;
            } else if (!moved) {
                continue;
            }
        }
        std::string f = format_feed(p.f);
        if (m.path_start || !last_feed || *last_feed != f) {
            line += " F" + f;
            last_feed = std::move(f);
        }
        out += line;
        out += '\n';
        last_pose = p;
    }
    out += kPostamble;
    return out;
}

struct Annotation {
    std::size_t line;
    std::string text;
};

struct ParsedProgram {
    MachineProgram program;
    std::vector<std::size_t> lines;    // source line of each move
    std::vector<std::string> comments; // trailing comment of each move
    std::vector<Annotation> annotations;
};

namespace detail {

struct Word {
    char letter;
    double value;
};

inline std::vector<Word> split_words(std::string_view code, std::size_t line_no) {
    std::vector<Word> words;
    std::size_t i = 0;
    auto bad = [&](const std::string& why) {
        return Error(ErrorCode::MalformedLine, "gcode", "line " + std::to_string(line_no) + ": " + why);
    };
    while (i < code.size()) {
        if (std::isspace(static_cast<unsigned char>(code[i]))) {
            ++i;
            continue;
        }
        char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(code[i])));
        if (!std::isalpha(static_cast<unsigned char>(letter)))
            throw bad(std::string("unexpected character '") + code[i] + "'");
        ++i;
        std::size_t start = i;
        while (i < code.size() && (std::isdigit(static_cast<unsigned char>(code[i])) || code[i] == '.' ||
                                   code[i] == '-' || code[i] == '+'))
            ++i;
        std::string_view num = code.substr(start, i - start);
        if (!num.empty() && num.front() == '+')
            num.remove_prefix(1);
        double v;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (num.empty() || ec != std::errc() || ptr != num.data() + num.size())
            throw bad(std::string("word '") + letter + std::string(code.substr(start, i - start)) +
                      "' has no valid number");
        words.push_back({letter, v});
    }
    return words;
}

} // namespace detail

/// Reads the dialect subset G0 G1 G21 G90 G91 G92 M82 M83 back into an
/// absolute pose stream. Other commands are kept as annotations.
inline ParsedProgram parse(std::string_view text) {
    ParsedProgram result;
    MachinePose state;
    std::optional<bool> absolute_axes;
    bool relative_e = false;
    std::size_t line_no = 0;

    while (!text.empty()) {
        ++line_no;
        std::size_t nl = text.find('\n');
        std::string_view raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!raw.empty() && raw.back() == '\r')
            raw.remove_suffix(1);

        std::string_view code = raw;
        std::string comment;
        if (auto semi = raw.find(';'); semi != std::string_view::npos) {
            code = raw.substr(0, semi);
            comment = std::string(detail::trim(raw.substr(semi + 1)));
        }
        code = detail::trim(code);
        if (code.empty())
            continue;

        auto words = detail::split_words(code, line_no);
        const detail::Word cmd = words.front();
        auto find = [&](char c) -> std::optional<double> {
            for (std::size_t i = 1; i < words.size(); ++i)
                if (words[i].letter == c)
                    return words[i].value;
            return std::nullopt;
        };
        auto is = [&](char letter, int number) { return cmd.letter == letter && cmd.value == number; };

        if (is('G', 0) || is('G', 1)) {
            if (!absolute_axes)
                throw Error(ErrorCode::ModeConflict, "gcode",
                            "line " + std::to_string(line_no) + ": move before G90/G91 positioning mode");
            MachinePose next = state;
            double* axes[5] = {&next.x, &next.y, &next.z, &next.u, &next.v};
            static constexpr char kLetters[5] = {'X', 'Y', 'Z', 'U', 'V'};
            for (int a = 0; a < 5; ++a) {
                if (auto v = find(kLetters[a])) {
                    *axes[a] = *absolute_axes ? *v : *axes[a] + *v;

                }
            }
            auto e = find('E');
            if (e)
                next.e = relative_e ? state.e + *e : *e;
            if (auto f = find('F'))
                next.f = *f;
            const bool moved = next.x != state.x || next.y != state.y || next.z != state.z || next.u != state.u ||
                               next.v != state.v;
            const double de = next.e - state.e;
            MoveKind kind;
            if (moved) {
                kind = (is('G', 1) && e && de >= 0.0) ? MoveKind::Extrude : MoveKind::Travel;
            } else if (de < 0.0) {
                kind = MoveKind::Retract;
            } else if (de > 0.0) {
                kind = MoveKind::Unretract;
            } else {
                state.f = next.f; // feedrate-only line
                continue;
            }
            bool path_start = kind == MoveKind::Extrude &&
                              (result.program.moves.empty() || result.program.moves.back().kind != MoveKind::Extrude);
            result.program.moves.push_back({next, kind, path_start, 0.0});
            result.lines.push_back(line_no);
            result.comments.push_back(std::move(comment));
            state = next;
        } else if (is('G', 90)) {
            absolute_axes = true;
        } else if (is('G', 91)) {
            absolute_axes = false;
        } else if (is('M', 82)) {
            relative_e = false;
        } else if (is('M', 83)) {
            relative_e = true;
        } else if (is('G', 92)) {
            double* axes[6] = {&state.x, &state.y, &state.z, &state.u, &state.v, &state.e};
            static constexpr char kLetters[6] = {'X', 'Y', 'Z', 'U', 'V', 'E'};
            for (int a = 0; a < 6; ++a)
                if (auto v = find(kLetters[a]))
                    *axes[a] = *v;
        } else if (is('G', 21)) {
            // millimetres already
        } else {
            result.annotations.push_back({line_no, std::string(raw)});
        }
    }
    return result;
}

/// Point-and-normal toolpath interchange: six numbers per line
/// (x y z i j k), blank lines separate paths, '#' starts a comment line.
/// Normals within 1e-3 of unit length are renormalized.
inline Toolpath parse_cls(std::string_view text) {
    Toolpath tp;
    Extrude current;
    std::size_t line_no = 0;
    auto flush = [&] {
        if (!current.samples.empty())
            tp.moves.emplace_back(std::move(current));
        current = Extrude{};
    };
    while (!text.empty()) {
        ++line_no;
        std::size_t nl = text.find('\n');
        std::string_view line = detail::trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) {
            flush();
            continue;
        }
        if (line.front() == '#')
            continue;
        double v[6];
        int count = 0;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        while (!line.empty()) {
            std::size_t end = 0;
            while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])))
                ++end;
            std::string_view tok = line.substr(0, end);
            line = detail::trim(line.substr(end));
            if (count == 6)
                throw Error(ErrorCode::MalformedRecord, "gcode", where + "more than six numbers");
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[count]);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v[count]))
                throw Error(ErrorCode::MalformedRecord, "gcode", where + "'" + std::string(tok) + "' is not a number");
            ++count;
        }
        if (count != 6)
            throw Error(ErrorCode::MalformedRecord, "gcode", where + "expected six numbers (x y z i j k)");
        Vec3 n(v[3], v[4], v[5]);
        if (std::abs(n.norm() - 1.0) > 1e-3)
            throw Error(ErrorCode::NonUnitNormalRecord, "gcode",
                        where + "normal length " + std::to_string(n.norm()) + " is not unit");
        current.samples.push_back({Vec3(v[0], v[1], v[2]), n.normalized()});
    }
    flush();
    return tp;
}

} // namespace open5x
