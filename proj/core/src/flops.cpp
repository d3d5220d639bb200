#include "dslnet/flops.hpp"

namespace dslnet {

double flops_dense(double batch_rows, double in_dim, double out_dim) {
    return 2.0 * batch_rows * in_dim * out_dim;
}

double flops_conv1d(double t_len, double kernel, double c_in, double c_out, double groups) {
    return 2.0 * t_len * kernel * c_in * c_out * groups;
}

double flops_bilstm(double t_len, double in_dim, double hidden) {
    return 2.0 * (2.0 * t_len * 4.0 * (in_dim + hidden) * hidden);
}

double flops_attention(double t_q, double t_kv, double q_dim, double kv_dim,
                       double model_dim, double out_dim) {
    double proj = flops_dense(t_q, q_dim, model_dim) +
                  2.0 * flops_dense(t_kv, kv_dim, model_dim) +
                  flops_dense(t_q, model_dim, out_dim);
    double scores = 2.0 * t_q * t_kv * model_dim;   // QK^T over all heads
    double mix = 2.0 * t_q * t_kv * model_dim;      // attn * V
    return proj + scores + mix;
}

double flop_estimate(const ModelConfig& cfg, std::size_t t_len) {
    double T = (double)t_len;
    double J = (double)kNumHandJoints;
    double total = 0.0;

    bool has_tssn = cfg.mode != AblationMode::FtdeOnly;
    bool has_ftde = cfg.mode != AblationMode::TssnOnly;
    bool has_fusion = cfg.mode == AblationMode::DualGeoOt ||
                      cfg.mode == AblationMode::DualCrossAttn ||
                      cfg.mode == AblationMode::GlobalNorm;

    if (has_tssn) {
        double c_in = 2.0;
        double agg = 0.0;
        for (std::size_t c : cfg.tssn.block_channels) {
            double edges = T * J * (double)cfg.tssn.k;
            total += flops_dense(edges, 2.0 * c_in, (double)c);           // edge MLP
            total += flops_conv1d(T, (double)cfg.tssn.temporal_kernel,
                                  (double)c, (double)c, J);               // temporal conv
            agg += (double)c;
            c_in = (double)c;
        }
        total += flops_bilstm(T, agg, (double)cfg.tssn.lstm_hidden);
        double dm = 2.0 * (double)cfg.tssn.lstm_hidden;
        total += flops_attention(T, T, dm, dm, dm, (double)cfg.tssn.out_dim);
    }
    if (has_ftde) {
        double c_in = 2.0;
        for (std::size_t c : cfg.ftde.conv_channels) {
            total += flops_conv1d(T, (double)cfg.ftde.conv_kernel, c_in, (double)c, 1.0);
            c_in = (double)c;
        }
        total += flops_bilstm(T, c_in, (double)cfg.ftde.lstm_hidden);
        total += flops_dense(T, 2.0 * (double)cfg.ftde.lstm_hidden, (double)cfg.ftde.out_dim);
        // phi network over T frames
        total += flops_dense(T, 4.0, (double)cfg.finsler.phi_hidden);
        total += flops_dense(T, (double)cfg.finsler.phi_hidden, 1.0);
    }
    double d_s = (double)cfg.tssn.out_dim, d_t = (double)cfg.ftde.out_dim;
    if (has_fusion) {
        total += flops_attention(T, T, d_s, d_t, d_s, d_s);
        total += flops_attention(T, T, d_t, d_s, d_t, d_t);
        if (cfg.mode != AblationMode::DualCrossAttn) {
            total += 2.0 * T * d_t;                 // OT cost cosine terms
            total += flops_dense(1.0, T, d_t);      // plan-weighted average
        }
    }
    switch (cfg.mode) {
        case AblationMode::TssnOnly:
            total += flops_dense(1.0, d_s, (double)cfg.fusion.num_classes);
            break;
        case AblationMode::FtdeOnly:
            total += flops_dense(1.0, d_t, (double)cfg.fusion.num_classes);
            break;
        default:
            total += flops_dense(1.0, d_s + d_t, (double)cfg.fusion.num_classes);
            break;
    }
    return total;
}

}  // namespace dslnet
