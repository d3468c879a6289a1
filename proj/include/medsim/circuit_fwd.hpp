#pragma once

namespace medsim {
class Circuit;
}
