#include "arcfit/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace arcfit {

using ordered_json = nlohmann::ordered_json;

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw OutputError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw OutputError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw OutputError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void appendf(std::string& out, const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    out += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, int line_no) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
    }
}

}  // namespace

std::string format_points_file(std::span<const DataPoint> points) {
    std::string out = "index,x,y,sxx,sxy,syy\n";
    for (const DataPoint& p : points) {
        out += std::to_string(p.index);
        for (double v : {p.pos.x, p.pos.y, p.cov.xx, p.cov.xy, p.cov.yy}) {
            out += ',';
            appendf(out, "%.9f", v);
        }
        out += '\n';
    }
    return out;
}

std::vector<DataPoint> parse_points_file(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<DataPoint> points;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1) {
            if (line.rfind("index,", 0) != 0)
                throw InputError("line 1: expected header 'index,x,y,sxx,sxy,syy'");
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 6)
            throw InputError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                             std::to_string(fields.size()));
        DataPoint p;
        p.index = static_cast<int>(parse_double(fields[0], line_no));
        p.pos = {parse_double(fields[1], line_no), parse_double(fields[2], line_no)};
        if (!p.pos.finite())
            throw InputError("line " + std::to_string(line_no) + ": non-finite coordinate");
        Eigen::Matrix2d raw;
        raw << parse_double(fields[3], line_no), parse_double(fields[4], line_no),
            parse_double(fields[4], line_no), parse_double(fields[5], line_no);
        try {
            p.cov = validate_cov(raw).cov;
        } catch (const NonFiniteValue&) {
            throw InputError("line " + std::to_string(line_no) + ": non-finite covariance");
        }
        const int expected = static_cast<int>(points.size()) + 1;
        if (p.index != expected)
            throw InputError("line " + std::to_string(line_no) + ": expected index " +
                             std::to_string(expected) + ", got " + std::to_string(p.index));
        points.push_back(p);
    }
    return points;
}

std::vector<DataPoint> read_points_file(const std::string& path) {
    return parse_points_file(read_text_file(path));
}

void write_points_file(const std::string& path, std::span<const DataPoint> points) {
    atomic_write_text(path, format_points_file(points));
}

std::string format_spline_file(const ArcSpline& spline, const std::string& verdict,
                               const std::string& config_hash) {
    ordered_json doc;
    doc["format"] = "arcfit-spline-v1";
    doc["config_hash"] = config_hash;
    doc["verdict"] = verdict;
    doc["segments"] = spline.segments();
    doc["control_points"] = spline.control_points();
    doc["total_length"] = spline.total_length();

    ordered_json arcs = ordered_json::array();
    for (int i = 0; i <= spline.segments(); ++i)
        arcs.push_back({spline.nodes.arc(i).x, spline.nodes.arc(i).y});
    doc["arc_nodes"] = arcs;

    ordered_json mids = ordered_json::array();
    for (int i = 0; i < spline.segments(); ++i)
        mids.push_back({spline.nodes.mid(i).x, spline.nodes.mid(i).y});
    doc["middle_nodes"] = mids;

    doc["association"] = spline.assoc.ordinals;

    ordered_json segs = ordered_json::array();
    for (int i = 0; i < spline.segments(); ++i) {
        ordered_json seg;
        if (spline.geometry[i]) {
            const ArcGeometry& g = *spline.geometry[i];
            const ArcAngles ang = arc_angles(spline.nodes.segment_params(i), g);
            seg["center"] = {g.center.x, g.center.y};
            seg["radius"] = g.radius;
            seg["start_angle"] = ang.start;
            seg["end_angle"] = ang.end();
        } else {
            seg["center"] = nullptr;
            seg["radius"] = 0.0;
            seg["start_angle"] = 0.0;
            seg["end_angle"] = 0.0;
        }
        seg["invalid_count"] = spline.invalid_counts[i];
        segs.push_back(seg);
    }
    doc["segment_info"] = segs;
    return doc.dump(2) + "\n";
}

void write_spline_file(const std::string& path, const ArcSpline& spline,
                       const std::string& verdict, const std::string& config_hash) {
    atomic_write_text(path, format_spline_file(spline, verdict, config_hash));
}

SplineFileData read_spline_file(const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }

    try {
        const int m = doc.at("segments").get<int>();
        const auto& arcs = doc.at("arc_nodes");
        const auto& mids = doc.at("middle_nodes");
        if (static_cast<int>(arcs.size()) != m + 1 || static_cast<int>(mids.size()) != m)
            throw InputError(path + ": node counts do not match segment count");

        NodeVector nodes(m);
        for (int i = 0; i <= m; ++i)
            nodes.set_arc(i, {arcs[i][0].get<double>(), arcs[i][1].get<double>()});
        for (int i = 0; i < m; ++i)
            nodes.set_mid(i, {mids[i][0].get<double>(), mids[i][1].get<double>()});

        Association assoc;
        for (const auto& v : doc.at("association")) assoc.ordinals.push_back(v.get<int>());

        ArcSpline spline = make_spline(std::move(nodes), std::move(assoc));

        const auto& segs = doc.at("segment_info");
        if (static_cast<int>(segs.size()) != m)
            throw InputError(path + ": segment_info size mismatch");
        for (int i = 0; i < m; ++i) {
            spline.invalid_counts[i] = segs[i].at("invalid_count").get<int>();
            spline.segment_valid[i] = true;
            if (segs[i].at("center").is_null()) continue;
            if (!spline.geometry[i])
                throw InputError(path + ": segment " + std::to_string(i) +
                                 " stores geometry but nodes are degenerate");
            const ArcGeometry& g = *spline.geometry[i];
            const double cx = segs[i]["center"][0].get<double>();
            const double cy = segs[i]["center"][1].get<double>();
            const double r = segs[i]["radius"].get<double>();
            const double scale = 1.0 + std::abs(r);
            if (std::abs(cx - g.center.x) > 1e-9 * scale ||
                std::abs(cy - g.center.y) > 1e-9 * scale || std::abs(r - g.radius) > 1e-9 * scale)
                throw InputError(path + ": segment " + std::to_string(i) +
                                 " geometry inconsistent with nodes");
        }

        SplineFileData data{std::move(spline), doc.at("verdict").get<std::string>(),
                            doc.at("config_hash").get<std::string>()};
        return data;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

namespace {

constexpr int kCovUpperCount = 45;

std::string trajectory_header(bool quaternion) {
    std::string h = "px,py,pz,";
    if (quaternion) {
        h += "qw,qx,qy,qz,";
    } else {
        h += "r11,r12,r13,r21,r22,r23,r31,r32,r33,";
    }
    h += "lx,ly,lz,rx,ry,rz";
    for (int i = 0; i < 9; ++i)
        for (int j = i; j < 9; ++j) h += ",c" + std::to_string(i) + std::to_string(j);
    return h;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

}  // namespace

std::vector<VehicleState> read_trajectory_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    int line_no = 0;
    bool quaternion = false;
    std::vector<VehicleState> states;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1) {
            if (line.rfind("px,", 0) != 0) throw InputError("line 1: expected trajectory header");
            quaternion = line.find(",qw,") != std::string::npos;
            continue;
        }
        const auto fields = split_csv(line);
        const size_t expected = (quaternion ? 7u : 12u) + 6u + kCovUpperCount;
        if (fields.size() != expected)
            throw InputError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(expected) + " fields, got " +
                             std::to_string(fields.size()));

        size_t f = 0;
        auto next = [&]() { return parse_double(fields[f++], line_no); };
        VehicleState st;
        st.position = {next(), next(), next()};

        Eigen::Matrix3d rot;
        if (quaternion) {
            const double w = next(), x = next(), y = next(), z = next();
            Eigen::Quaterniond q(w, x, y, z);
            if (q.norm() < 1e-12)
                throw InputError("line " + std::to_string(line_no) + ": zero quaternion");
            rot = q.normalized().toRotationMatrix();
        } else {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) rot(r, c) = next();
        }
        const int state_index = static_cast<int>(states.size()) + 1;
        if (!is_rotation(rot, 1e-6))
            throw InputError("state " + std::to_string(state_index) +
                             ": rotation violates orthonormality beyond 1e-6");
        st.rotation = nearest_rotation(rot);

        st.lane_left = {next(), next(), next()};
        st.lane_right = {next(), next(), next()};

        Matrix9d cov;
        for (int i = 0; i < 9; ++i)
            for (int j = i; j < 9; ++j) {
                const double v = next();
                cov(i, j) = v;
                cov(j, i) = v;
            }
        st.joint_cov = repair_psd(cov);
        states.push_back(st);
    }
    return states;
}

void write_trajectory_file(const std::string& path, std::span<const VehicleState> states) {
    std::string out = trajectory_header(false) + "\n";
    for (const VehicleState& st : states) {
        std::string row;
        auto push = [&](double v) {
            if (!row.empty()) row += ',';
            appendf(row, "%.9f", v);
        };
        for (int i = 0; i < 3; ++i) push(st.position[i]);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) push(st.rotation(r, c));
        for (int i = 0; i < 3; ++i) push(st.lane_left[i]);
        for (int i = 0; i < 3; ++i) push(st.lane_right[i]);
        for (int i = 0; i < 9; ++i)
            for (int j = i; j < 9; ++j) push(st.joint_cov(i, j));
        out += row + "\n";
    }
    atomic_write_text(path, out);
}

namespace {

Cov2 parse_cov_value(const std::string& value, const std::string& key) {
    const auto fields = split_csv(value);
    try {
        if (fields.size() == 1) return Cov2::isotropic(std::stod(fields[0]));
        if (fields.size() == 3)
            return Cov2{std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2])};
    } catch (const std::exception&) {
    }
    throw InputError("config key '" + key + "': expected variance or 'xx,xy,yy'");
}

}  // namespace

FitConfig parse_config(const std::string& text) {
    FitConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto number = [&]() { return parse_double(value, line_no); };

        if (key == "epsilon") cfg.epsilon = number();
        else if (key == "l_min") cfg.l_min = number();
        else if (key == "confidence") cfg.confidence = number();
        else if (key == "invalid_count_threshold") cfg.invalid_count_threshold = static_cast<int>(number());
        else if (key == "max_segments") cfg.max_segments = static_cast<int>(number());
        else if (key == "sigma_ac1") cfg.anchor.sigma_ac1 = parse_cov_value(value, key);
        else if (key == "sigma_ac2") cfg.anchor.sigma_ac2 = parse_cov_value(value, key);
        else if (key == "max_outer_iterations") cfg.solver.max_outer_iterations = static_cast<int>(number());
        else if (key == "max_inner_iterations") cfg.solver.max_inner_iterations = static_cast<int>(number());
        else if (key == "g_tol") cfg.solver.g_tol = number();
        else if (key == "x_tol") cfg.solver.x_tol = number();
        else if (key == "c_tol") cfg.solver.c_tol = number();
        else if (key == "mu0") cfg.solver.mu0 = number();
        else if (key == "rho") cfg.solver.rho = number();
        else if (key == "lambda0") cfg.solver.lambda0 = number();
        else if (key == "jacobian_mode") {
            if (value == "analytic") cfg.jacobian_mode = JacobianMode::Analytic;
            else if (value == "forward_difference") cfg.jacobian_mode = JacobianMode::ForwardDifference;
            else throw InputError("config line " + std::to_string(line_no) + ": unknown jacobian_mode");
        } else if (key == "reassociation") {
            if (value == "accepted_step") cfg.reassociation = ReassociationMode::AcceptedStep;
            else if (value == "outer_round") cfg.reassociation = ReassociationMode::OuterRound;
            else throw InputError("config line " + std::to_string(line_no) + ": unknown reassociation");
        } else {
            throw InputError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }

    if (!(cfg.epsilon > 0.0)) throw InputError("epsilon must be positive");
    if (!(cfg.l_min > 0.0)) throw InputError("l_min must be positive");
    if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0))
        throw InputError("confidence must be in (0, 1)");
    if (cfg.invalid_count_threshold < 0) throw InputError("invalid_count_threshold must be >= 0");
    return cfg;
}

FitConfig load_config(const std::string& path) {
    if (path.empty()) return FitConfig{};
    return parse_config(read_text_file(path));
}

}  // namespace arcfit
