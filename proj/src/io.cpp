#include "varimatch/io.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace varimatch {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string out = buf;
    // keep integral-looking values on the JSON float path (preserves -0.0)
    if (out.find_first_of(".eE") == std::string::npos) out += ".0";
    return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw ParseError("write failed for '" + path.string() + "'");
}

json parse_json(const std::string& text, const std::string& name) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(name + ": invalid JSON");
    return j;
}

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw SchemaError(where + ": unknown key '" + it.key() + "'");
    }
}

double number_at(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw SchemaError(where + ": missing key '" + key + "'");
    const json& v = obj[key];
    if (!v.is_number()) throw SchemaError(where + ": '" + std::string(key) + "' must be a number");
    return v.get<double>();
}

int int_at(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw SchemaError(where + ": missing key '" + key + "'");
    const json& v = obj[key];
    if (!v.is_number_integer())
        throw SchemaError(where + ": '" + std::string(key) + "' must be an integer");
    return v.get<int>();
}

std::vector<double> number_array(const json& arr, const std::string& where, std::size_t count) {
    if (!arr.is_array() || arr.size() != count)
        throw SchemaError(where + " must be an array of " + std::to_string(count) + " numbers");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!arr[i].is_number()) throw SchemaError(where + " must contain only numbers");
        out[i] = arr[i].get<double>();
    }
    return out;
}

void append_array(std::string& out, std::span<const double> v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

} // namespace

std::string varifold_to_json(const DiscreteVarifold& mu) {
    const int n = mu.ambient_dim();
    const int d = mu.plane_dim();
    std::string out;
    out.reserve(64 + static_cast<std::size_t>(mu.atom_count()) * (d + 1) * n * 26);
    out += "{\"format\":\"varifold-v1\",\"n\":" + std::to_string(n) +
           ",\"d\":" + std::to_string(d) + ",\"atoms\":[";
    for (int i = 0; i < mu.atom_count(); ++i) {
        if (i) out += ',';
        out += "{\"x\":";
        append_array(out, mu.position(i));
        out += ",\"U\":[";
        for (int k = 0; k < d; ++k) {
            if (k) out += ',';
            append_array(out, mu.frame_vector(i, k));
        }
        out += "]}";
    }
    out += "]}\n";
    return out;
}

void write_varifold(const DiscreteVarifold& mu, const std::filesystem::path& path) {
    write_file(path, varifold_to_json(mu));
}

DiscreteVarifold read_varifold_stream(std::istream& in, const std::string& name) {
    std::ostringstream buf;
    buf << in.rdbuf();
    const json j = parse_json(buf.str(), name);
    if (!j.is_object()) throw SchemaError(name + ": top level must be an object");
    require_keys(j, name, {"format", "n", "d", "atoms"});
    if (!j.contains("format") || !j["format"].is_string() ||
        j["format"].get<std::string>() != "varifold-v1")
        throw SchemaError(name + ": 'format' must be \"varifold-v1\"");
    const int n = int_at(j, name, "n");
    const int d = int_at(j, name, "d");
    if (n < 1) throw SchemaError(name + ": 'n' must be >= 1");
    if (d < 1 || d > n) throw SchemaError(name + ": 'd' must satisfy 1 <= d <= n");
    if (!j.contains("atoms") || !j["atoms"].is_array())
        throw SchemaError(name + ": missing key 'atoms'");

    DiscreteVarifold mu(n, d);
    std::vector<double> frame(static_cast<std::size_t>(n) * d);
    std::size_t idx = 0;
    for (const json& atom : j["atoms"]) {
        const std::string where = name + ": atoms[" + std::to_string(idx) + "]";
        if (!atom.is_object()) throw SchemaError(where + " must be an object");
        require_keys(atom, where, {"x", "U"});
        if (!atom.contains("x")) throw SchemaError(where + ": missing key 'x'");
        if (!atom.contains("U")) throw SchemaError(where + ": missing key 'U'");
        const auto x = number_array(atom["x"], where + ".x", n);
        const json& u = atom["U"];
        if (!u.is_array() || u.size() != static_cast<std::size_t>(d))
            throw SchemaError(where + ".U must be an array of d rows");
        for (int k = 0; k < d; ++k) {
            const auto row = number_array(u[k], where + ".U[" + std::to_string(k) + "]", n);
            std::copy(row.begin(), row.end(), frame.begin() + static_cast<std::size_t>(k) * n);
        }
        mu.add_atom(x, frame);
        ++idx;
    }
    return mu;
}

DiscreteVarifold read_varifold(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    return read_varifold_stream(in, path.string());
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    if (traj.states.empty()) throw ValidationError("write_trajectory: empty trajectory");
    const ShootingState& front = traj.states.front();
    std::string out;
    out += "{\"n\":" + std::to_string(front.n) + ",\"d\":" + std::to_string(front.d) +
           ",\"atoms\":" + std::to_string(front.atoms) +
           ",\"steps\":" + std::to_string(traj.steps) + ",\"states\":[";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        if (k) out += ',';
        out += "{\"t\":" + format_double(static_cast<double>(k) / traj.steps) + ",\"q\":";
        append_array(out, traj.states[k].q);
        out += ",\"p\":";
        append_array(out, traj.states[k].p);
        out += '}';
    }
    out += "]}\n";
    write_file(path, out);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    const std::string name = path.string();
    const json j = parse_json(read_file(path), name);
    if (!j.is_object()) throw SchemaError(name + ": top level must be an object");
    require_keys(j, name, {"n", "d", "atoms", "steps", "states"});
    const int n = int_at(j, name, "n");
    const int d = int_at(j, name, "d");
    const int atoms = int_at(j, name, "atoms");
    const int steps = int_at(j, name, "steps");
    if (steps < 1) throw SchemaError(name + ": 'steps' must be >= 1");
    if (!j.contains("states") || !j["states"].is_array() ||
        j["states"].size() != static_cast<std::size_t>(steps) + 1)
        throw SchemaError(name + ": 'states' must be an array of steps+1 entries");

    Trajectory traj;
    traj.steps = steps;
    const std::size_t dim = static_cast<std::size_t>(atoms) * n * (d + 1);
    std::size_t idx = 0;
    for (const json& entry : j["states"]) {
        const std::string where = name + ": states[" + std::to_string(idx) + "]";
        if (!entry.is_object()) throw SchemaError(where + " must be an object");
        require_keys(entry, where, {"t", "q", "p"});
        number_at(entry, where, "t");
        ShootingState s(n, d, atoms);
        s.q = number_array(entry["q"], where + ".q", dim);
        s.p = number_array(entry["p"], where + ".p", dim);
        traj.states.push_back(std::move(s));
        ++idx;
    }
    return traj;
}

RunConfig parse_config(const std::string& text, const std::string& name) {
    const json j = parse_json(text, name);
    if (!j.is_object()) throw SchemaError(name + ": top level must be an object");
    require_keys(j, name,
                 {"sigma_rho", "gamma", "sigma_v", "lambda", "steps", "optimizer",
                  "reduce_momentum", "seed"});
    RunConfig cfg;
    if (j.contains("sigma_rho")) {
        cfg.spatial.sigma_rho = number_at(j, name, "sigma_rho");
        if (!(cfg.spatial.sigma_rho > 0.0))
            throw ValidationError(name + ": 'sigma_rho' must be > 0");
    }
    if (j.contains("gamma")) {
        const json& g = j["gamma"];
        if (!g.is_object()) throw SchemaError(name + ": 'gamma' must be an object");
        require_keys(g, name + ".gamma", {"kind", "sigma_g"});
        if (!g.contains("kind") || !g["kind"].is_string())
            throw SchemaError(name + ".gamma: missing key 'kind'");
        cfg.grassmann.kind = grassmann_kind_from_string(g["kind"].get<std::string>());
        if (g.contains("sigma_g")) {
            cfg.grassmann.sigma_g = number_at(g, name + ".gamma", "sigma_g");
            if (!(cfg.grassmann.sigma_g > 0.0))
                throw ValidationError(name + ": 'gamma.sigma_g' must be > 0");
        }
    }
    if (j.contains("sigma_v")) {
        cfg.deformation.sigma_v = number_at(j, name, "sigma_v");
        if (!(cfg.deformation.sigma_v > 0.0))
            throw ValidationError(name + ": 'sigma_v' must be > 0");
    }
    if (j.contains("lambda")) {
        cfg.lambda = number_at(j, name, "lambda");
        if (!(cfg.lambda > 0.0)) throw ValidationError(name + ": 'lambda' must be > 0");
    }
    if (j.contains("steps")) {
        cfg.steps = int_at(j, name, "steps");
        if (cfg.steps < 1) throw ValidationError(name + ": 'steps' must be >= 1");
    }
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        if (!o.is_object()) throw SchemaError(name + ": 'optimizer' must be an object");
        require_keys(o, name + ".optimizer", {"memory", "max_iters", "grad_tol"});
        if (o.contains("memory")) {
            cfg.optimizer.memory = int_at(o, name + ".optimizer", "memory");
            if (cfg.optimizer.memory < 1)
                throw ValidationError(name + ": 'optimizer.memory' must be >= 1");
        }
        if (o.contains("max_iters")) {
            cfg.optimizer.max_iters = int_at(o, name + ".optimizer", "max_iters");
            if (cfg.optimizer.max_iters < 1)
                throw ValidationError(name + ": 'optimizer.max_iters' must be >= 1");
        }
        if (o.contains("grad_tol")) {
            cfg.optimizer.grad_tol = number_at(o, name + ".optimizer", "grad_tol");
            if (!(cfg.optimizer.grad_tol > 0.0))
                throw ValidationError(name + ": 'optimizer.grad_tol' must be > 0");
        }
    }
    if (j.contains("reduce_momentum")) {
        if (!j["reduce_momentum"].is_boolean())
            throw SchemaError(name + ": 'reduce_momentum' must be a boolean");
        cfg.reduce_momentum = j["reduce_momentum"].get<bool>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() || j["seed"].get<double>() < 0)
            throw SchemaError(name + ": 'seed' must be a nonnegative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    return cfg;
}

RunConfig read_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.string());
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

int parse_face_index(const std::string& token, std::size_t vertex_count, int line_no,
                     const std::string& name) {
    // OBJ face tokens may be v, v/vt, v//vn or v/vt/vn; only v is used.
    const std::string head = token.substr(0, token.find('/'));
    int idx = 0;
    try {
        idx = std::stoi(head);
    } catch (...) {
        throw ParseError(name + ":" + std::to_string(line_no) + ": bad face index '" + token +
                         "'");
    }
    if (idx < 1 || static_cast<std::size_t>(idx) > vertex_count)
        throw ParseError(name + ":" + std::to_string(line_no) + ": face index " +
                         std::to_string(idx) + " out of range (1.." +
                         std::to_string(vertex_count) + ")");
    return idx - 1;
}

} // namespace

DiscreteVarifold obj_to_varifold(std::istream& in, const std::string& name) {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto tokens = split_ws(line);
        if (tokens.empty() || tokens[0][0] == '#') continue;
        if (tokens[0] == "v") {
            if (tokens.size() < 4)
                throw ParseError(name + ":" + std::to_string(line_no) +
                                 ": vertex needs 3 coordinates");
            std::array<double, 3> v{};
            for (int c = 0; c < 3; ++c) {
                try {
                    v[c] = std::stod(tokens[c + 1]);
                } catch (...) {
                    throw ParseError(name + ":" + std::to_string(line_no) +
                                     ": bad vertex coordinate '" + tokens[c + 1] + "'");
                }
            }
            vertices.push_back(v);
        } else if (tokens[0] == "f") {
            if (tokens.size() != 4)
                throw ParseError(name + ":" + std::to_string(line_no) +
                                 ": only triangular faces are supported (got " +
                                 std::to_string(tokens.size() - 1) + " vertices)");
            std::array<int, 3> f{};
            for (int c = 0; c < 3; ++c)
                f[c] = parse_face_index(tokens[c + 1], vertices.size(), line_no, name);
            faces.push_back(f);
        }
        // vn / vt / usemtl / o / g / s records are ignored
    }

    DiscreteVarifold mu(3, 2);
    for (const auto& f : faces) {
        const auto& v0 = vertices[f[0]];
        const auto& v1 = vertices[f[1]];
        const auto& v2 = vertices[f[2]];
        std::array<double, 3> x{}, e1{}, e2{};
        for (int c = 0; c < 3; ++c) {
            x[c] = (v0[c] + v1[c] + v2[c]) / 3.0;
            e1[c] = v1[c] - v0[c];
            e2[c] = v2[c] - v0[c];
        }
        std::vector<double> frame(6);
        std::copy(e1.begin(), e1.end(), frame.begin());
        std::copy(e2.begin(), e2.end(), frame.begin() + 3);
        const double wedge = frame_weight(3, 2, frame);
        // scale so the frame weight equals the cell area wedge/2
        const double scale = wedge > 0.0 ? std::sqrt((wedge / 2.0) / wedge) : 0.0;
        for (auto& v : frame) v *= scale;
        mu.add_atom(std::vector<double>(x.begin(), x.end()), frame);
    }
    return mu;
}

DiscreteVarifold csv_polyline_to_varifold(std::istream& in, const std::string& name) {
    std::vector<std::vector<double>> component;
    std::vector<std::vector<std::vector<double>>> components;
    std::string line;
    int line_no = 0;
    int n = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) {
            if (!component.empty()) components.push_back(std::move(component));
            component.clear();
            continue;
        }
        std::vector<double> vertex;
        std::istringstream is(trimmed);
        std::string cell;
        while (std::getline(is, cell, ',')) {
            try {
                vertex.push_back(std::stod(cell));
            } catch (...) {
                throw ParseError(name + ":" + std::to_string(line_no) +
                                 ": bad coordinate '" + cell + "'");
            }
        }
        if (vertex.empty())
            throw ParseError(name + ":" + std::to_string(line_no) + ": empty vertex row");
        if (n < 0) n = static_cast<int>(vertex.size());
        if (static_cast<int>(vertex.size()) != n)
            throw ParseError(name + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(n) + " coordinates, got " +
                             std::to_string(vertex.size()));
        component.push_back(std::move(vertex));
    }
    if (!component.empty()) components.push_back(std::move(component));
    if (n < 0) throw ParseError(name + ": no vertices found");

    DiscreteVarifold mu(n, 1);
    std::vector<double> x(n), u(n);
    for (const auto& poly : components) {
        for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
            for (int c = 0; c < n; ++c) {
                x[c] = 0.5 * (poly[i][c] + poly[i + 1][c]);
                u[c] = poly[i + 1][c] - poly[i][c];
            }
            mu.add_atom(x, u);
        }
    }
    return mu;
}

DiscreteVarifold mesh_to_varifold(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    const std::string ext = path.extension().string();
    if (ext == ".obj") return obj_to_varifold(in, path.string());
    if (ext == ".csv") return csv_polyline_to_varifold(in, path.string());
    throw ValidationError("mesh_to_varifold: unsupported extension '" + ext +
                          "' (expected .obj or .csv)");
}

} // namespace varimatch
