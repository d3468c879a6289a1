#pragma once

#include <cstdint>

namespace medsim::sub {

// Bracha broadcast
inline constexpr uint8_t BcInit = 1, BcEcho = 2, BcReady = 3;

// consensus (body: u16 elem, u16 round, u8 value)
inline constexpr uint8_t CnBval = 1, CnAux = 2, CnDecide = 3;

// verifiable secret sharing
inline constexpr uint8_t VsRowCol = 1, VsChk = 2, VsRepair = 3, VsReady = 4;
inline constexpr uint8_t VsVoteBase = 8;  // +0 init, +1 echo, +2 ready

// public/directed reconstruction (body: u16 comp, u32 value)
inline constexpr uint8_t OpShare = 1;

// shared circuit evaluation (body: u16 mulseq, u32 value)
inline constexpr uint8_t CcOpen = 1, CcReady = 2;

}  // namespace medsim::sub
