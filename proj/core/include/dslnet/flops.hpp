#pragma once

#include "dslnet/model.hpp"

namespace dslnet {

// Analytic multiply-add counting for one forward pass at sequence length T:
// dense m->n on B rows costs 2*B*m*n, conv1d 2*T*K*Cin*Cout per group, LSTM
// 2*T*4*(in+H)*H per direction, attention with standard QKV accounting.
double flops_dense(double batch_rows, double in_dim, double out_dim);
double flops_conv1d(double t_len, double kernel, double c_in, double c_out, double groups);
double flops_bilstm(double t_len, double in_dim, double hidden);
double flops_attention(double t_q, double t_kv, double q_dim, double kv_dim,
                       double model_dim, double out_dim);

double flop_estimate(const ModelConfig& cfg, std::size_t t_len);

}  // namespace dslnet
