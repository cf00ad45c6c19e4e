"""Tabulated nested quadrature rules for the standard normal density.

Sizes 1, 3, 9, 19, 35; each level contains all nodes of the previous one.
Regenerate with ``scripts/gen_nested_gauss_table.py``.
"""

# generated by scripts/gen_nested_gauss_table.py -- do not edit
NESTED_NORMAL_RULES = {
    1: (
        [
            0.0,
        ],
        [
            1.0,
        ],
    ),
    3: (
        [
            -1.7320508075688773,
            0.0,
            1.7320508075688773,
        ],
        [
            0.16666666666666667,
            0.66666666666666667,
            0.16666666666666667,
        ],
    ),
    9: (
        [
            -4.1849560176727319,
            -2.8612795760570581,
            -1.7320508075688773,
            -0.74109534999454084,
            0.0,
            0.74109534999454084,
            1.7320508075688773,
            2.8612795760570581,
            4.1849560176727319,
        ],
        [
            9.4269457556517489e-5,
            0.0079963254708935328,
            0.094850948509485095,
            0.27007432957793787,
            0.25396825396825397,
            0.27007432957793787,
            0.094850948509485095,
            0.0079963254708935328,
            9.4269457556517489e-5,
        ],
    ),
    19: (
        [
            -6.36339449433637,
            -5.1870160399136561,
            -4.1849560176727319,
            -3.2053337944991945,
            -2.8612795760570581,
            -2.5960831150492022,
            -1.7320508075688773,
            -1.230423634027306,
            -0.74109534999454084,
            0.0,
            0.74109534999454084,
            1.230423634027306,
            1.7320508075688773,
            2.5960831150492022,
            2.8612795760570581,
            3.2053337944991945,
            4.1849560176727319,
            5.1870160399136561,
            6.36339449433637,
        ],
        [
            8.6296846022298858e-10,
            6.0948087314689835e-7,
            6.0123369459847818e-5,
            0.0028848804365067513,
            -0.0063372247933737359,
            0.018085234254798453,
            0.064096054686807589,
            0.061151730125247677,
            0.20832499164960888,
            0.30346719985420587,
            0.20832499164960888,
            0.061151730125247677,
            0.064096054686807589,
            0.018085234254798453,
            -0.0063372247933737359,
            0.0028848804365067513,
            6.0123369459847818e-5,
            6.0948087314689835e-7,
            8.6296846022298858e-10,
        ],
    ),
    35: (
        [
            -9.0169397898903025,
            -7.9807717985905609,
            -7.1221067008046167,
            -6.36339449433637,
            -5.6981777684881096,
            -5.1870160399136561,
            -4.7364330859522971,
            -4.1849560176727319,
            -3.6353185190372782,
            -3.2053337944991945,
            -2.8612795760570581,
            -2.5960831150492022,
            -2.2336260616769417,
            -1.7320508075688773,
            -1.230423634027306,
            -0.74109534999454084,
            -0.24899229757996061,
            0.0,
            0.24899229757996061,
            0.74109534999454084,
            1.230423634027306,
            1.7320508075688773,
            2.2336260616769417,
            2.5960831150492022,
            2.8612795760570581,
            3.2053337944991945,
            3.6353185190372782,
            4.1849560176727319,
            4.7364330859522971,
            5.1870160399136561,
            5.6981777684881096,
            6.36339449433637,
            7.1221067008046167,
            7.9807717985905609,
            9.0169397898903025,
        ],
        [
            1.0541326582333341e-18,
            5.4500412650636899e-15,
            3.0972223576063162e-12,
            4.6011760348656187e-10,
            2.1394194479561106e-8,
            2.4676421345798079e-7,
            2.734220680118783e-6,
            3.57293481989751e-5,
            0.00027524214116785157,
            0.00081895392750226491,
            0.0023113452403522101,
            0.0031554462691875638,
            0.015673473751851152,
            0.045273685465150516,
            0.092364726716986306,
            0.14807083115521601,
            0.19176011588804443,
            0.00051489450806878429,
            0.19176011588804443,
            0.14807083115521601,
            0.092364726716986306,
            0.045273685465150516,
            0.015673473751851152,
            0.0031554462691875638,
            0.0023113452403522101,
            0.00081895392750226491,
            0.00027524214116785157,
            3.57293481989751e-5,
            2.734220680118783e-6,
            2.4676421345798079e-7,
            2.1394194479561106e-8,
            4.6011760348656187e-10,
            3.0972223576063162e-12,
            5.4500412650636899e-15,
            1.0541326582333341e-18,
        ],
    ),
}
