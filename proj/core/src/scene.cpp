#include <skewsplat/scene.hpp>

#include <string>

namespace skewsplat {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::Io: return "io";
        case ErrorCode::MalformedHeader: return "malformed_header";
        case ErrorCode::UnsupportedFormat: return "unsupported_format";
        case ErrorCode::MissingField: return "missing_field";
        case ErrorCode::TruncatedPayload: return "truncated_payload";
        case ErrorCode::Parse: return "parse";
        case ErrorCode::ContractViolation: return "contract_violation";
        case ErrorCode::Divergence: return "divergence";
    }
    return "unknown";
}

PrimitiveGrad& PrimitiveGrad::operator+=(const PrimitiveGrad& o) {
    d_mu += o.d_mu;
    d_log_scale += o.d_log_scale;
    d_rot += o.d_rot;
    for (int k = 0; k < kMaxShCoeffs; ++k) d_sh[k] += o.d_sh[k];
    d_opacity_logits += o.d_opacity_logits;
    d_beta += o.d_beta;
    d_dir += o.d_dir;
    return *this;
}

bool PrimitiveGrad::all_finite() const {
    bool ok = d_mu.allFinite() && d_log_scale.allFinite() && d_rot.allFinite() &&
              d_opacity_logits.allFinite() && d_beta.allFinite() && d_dir.allFinite();
    for (const auto& c : d_sh) ok = ok && c.allFinite();
    return ok;
}

ParamGroup param_group(int k, int sh_degree) {
    const int n_sh = 3 * sh_coeff_count(sh_degree);
    if (k < 3) return ParamGroup::Position;
    if (k < 6) return ParamGroup::Scale;
    if (k < 10) return ParamGroup::Rotation;
    if (k < 13) return ParamGroup::ShDc;
    if (k < 10 + n_sh) return ParamGroup::ShRest;
    if (k < 12 + n_sh) return ParamGroup::Opacity;
    if (k < 15 + n_sh) return ParamGroup::Beta;
    return ParamGroup::Dir;
}

namespace {

template <class Prim, class Visit>
void visit_fields(Prim& g, int sh_degree, Visit&& visit) {
    // Order must match param_group().
    for (int i = 0; i < 3; ++i) visit(g.mu[i]);
    for (int i = 0; i < 3; ++i) visit(g.log_scale[i]);
    for (int i = 0; i < 4; ++i) visit(g.rot[i]);
    for (int k = 0; k < sh_coeff_count(sh_degree); ++k)
        for (int c = 0; c < 3; ++c) visit(g.sh[k][c]);
    for (int i = 0; i < 2; ++i) visit(g.opacity_logits[i]);
    for (int i = 0; i < 3; ++i) visit(g.beta[i]);
    for (int i = 0; i < 3; ++i) visit(g.dir[i]);
}

template <class Grad, class Visit>
void visit_grad_fields(Grad& d, int sh_degree, Visit&& visit) {
    for (int i = 0; i < 3; ++i) visit(d.d_mu[i]);
    for (int i = 0; i < 3; ++i) visit(d.d_log_scale[i]);
    for (int i = 0; i < 4; ++i) visit(d.d_rot[i]);
    for (int k = 0; k < sh_coeff_count(sh_degree); ++k)
        for (int c = 0; c < 3; ++c) visit(d.d_sh[k][c]);
    for (int i = 0; i < 2; ++i) visit(d.d_opacity_logits[i]);
    for (int i = 0; i < 3; ++i) visit(d.d_beta[i]);
    for (int i = 0; i < 3; ++i) visit(d.d_dir[i]);
}

}  // namespace

void pack_params(const SkewGaussian& g, int sh_degree, std::span<double> out) {
    std::size_t k = 0;
    visit_fields(g, sh_degree, [&](const double& v) { out[k++] = v; });
}

void unpack_params(std::span<const double> in, int sh_degree, SkewGaussian& g) {
    std::size_t k = 0;
    visit_fields(g, sh_degree, [&](double& v) { v = in[k++]; });
}

void pack_grad(const PrimitiveGrad& d, int sh_degree, std::span<double> out) {
    std::size_t k = 0;
    visit_grad_fields(d, sh_degree, [&](const double& v) { out[k++] = v; });
}

Mat3 rotation_matrix(const Vec4& q_raw) {
    const Vec4 q = q_raw / q_raw.norm();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance3d(const SkewGaussian& g) {
    const Mat3 m = rotation_matrix(g.rot) * g.log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

bool is_valid(const SkewGaussian& g) {
    bool ok = g.mu.allFinite() && g.log_scale.allFinite() && g.rot.allFinite() &&
              g.opacity_logits.allFinite() && g.beta.allFinite() && g.dir.allFinite();
    for (const auto& c : g.sh) ok = ok && c.allFinite();
    const double qn = g.rot.norm();
    return ok && qn > 0.0 && std::isfinite(qn);
}

void validate(const Scene& scene) {
    if (scene.sh_degree < 0 || scene.sh_degree > kMaxShDegree)
        throw Error(ErrorCode::InvalidArgument,
                    "sh_degree must be in [0, 3], got " + std::to_string(scene.sh_degree),
                    "sh_degree");
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        if (!is_valid(scene.primitives[i]))
            throw Error(ErrorCode::InvalidArgument,
                        "primitive " + std::to_string(i) + " has non-finite or degenerate fields",
                        "primitive[" + std::to_string(i) + "]");
    }
}

}  // namespace skewsplat
